#pragma once

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "sunny/errors.hpp"

namespace sunny {

/// One spawned solver process with a non-blocking pipe on its stdout.
/// stdin is /dev/null; stderr is inherited so solver noise stays visible.
class ChildProcess {
public:
    ChildProcess() = default;
    ChildProcess(const ChildProcess&) = delete;
    ChildProcess& operator=(const ChildProcess&) = delete;

    ~ChildProcess() {
        if (pid_ > 0 && !reaped_) {
            ::kill(pid_, SIGKILL);
            int status = 0;
            ::waitpid(pid_, &status, 0);
        }
        close_output();
    }

    /// Returns false (with *error set) when the fork or exec fails. Exec
    /// failures are caught through a CLOEXEC status pipe, so a bad command
    /// path reports immediately instead of producing a silent dead child.
    bool spawn(const std::vector<std::string>& argv, std::string* error) {
        if (argv.empty()) {
            if (error) *error = "empty command";
            return false;
        }
        int out_pipe[2];
        int status_pipe[2];
        if (::pipe(out_pipe) != 0) {
            if (error) *error = std::strerror(errno);
            return false;
        }
        if (::pipe(status_pipe) != 0) {
            if (error) *error = std::strerror(errno);
            ::close(out_pipe[0]);
            ::close(out_pipe[1]);
            return false;
        }
        ::fcntl(status_pipe[1], F_SETFD, FD_CLOEXEC);

        pid_ = ::fork();
        if (pid_ < 0) {
            if (error) *error = std::strerror(errno);
            for (int fd : {out_pipe[0], out_pipe[1], status_pipe[0], status_pipe[1]}) ::close(fd);
            pid_ = -1;
            return false;
        }
        if (pid_ == 0) {
            ::close(out_pipe[0]);
            ::close(status_pipe[0]);
            ::dup2(out_pipe[1], STDOUT_FILENO);
            ::close(out_pipe[1]);
            int devnull = ::open("/dev/null", O_RDONLY);
            if (devnull >= 0) {
                ::dup2(devnull, STDIN_FILENO);
                ::close(devnull);
            }
            std::vector<char*> cargv;
            cargv.reserve(argv.size() + 1);
            for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
            cargv.push_back(nullptr);
            ::execvp(cargv[0], cargv.data());
            int err = errno;
            ssize_t ignored = ::write(status_pipe[1], &err, sizeof err);
            (void)ignored;
            ::_exit(127);
        }

        ::close(out_pipe[1]);
        ::close(status_pipe[1]);
        out_fd_ = out_pipe[0];
        ::fcntl(out_fd_, F_SETFL, O_NONBLOCK);

        int child_errno = 0;
        ssize_t n = ::read(status_pipe[0], &child_errno, sizeof child_errno);
        ::close(status_pipe[0]);
        if (n > 0) {
            if (error) *error = argv[0] + ": " + std::strerror(child_errno);
            int status = 0;
            ::waitpid(pid_, &status, 0);
            reaped_ = true;
            close_output();
            pid_ = -1;
            return false;
        }
        return true;
    }

    /// Complete lines available right now (non-blocking). A trailing fragment
    /// without a newline stays buffered until it is finished or EOF arrives.
    std::vector<std::string> read_lines() {
        std::vector<std::string> lines;
        if (out_fd_ < 0) return lines;
        char buf[4096];
        for (;;) {
            ssize_t n = ::read(out_fd_, buf, sizeof buf);
            if (n > 0) {
                partial_.append(buf, static_cast<std::size_t>(n));
                continue;
            }
            if (n == 0) {
                eof_ = true;
                close_output();
            }
            break;  // EAGAIN, EOF, or error: flush what we have
        }
        std::size_t at = 0;
        for (std::size_t nl = partial_.find('\n'); nl != std::string::npos;
             nl = partial_.find('\n', at)) {
            lines.push_back(partial_.substr(at, nl - at));
            at = nl + 1;
        }
        partial_.erase(0, at);
        if (eof_ && !partial_.empty()) {  // unterminated final line
            lines.push_back(partial_);
            partial_.clear();
        }
        return lines;
    }

    bool eof() const { return eof_; }

    bool exited() {
        if (pid_ <= 0 || reaped_) return true;
        int status = 0;
        pid_t r = ::waitpid(pid_, &status, WNOHANG);
        if (r == pid_) reaped_ = true;
        return reaped_;
    }

    void terminate() {
        if (pid_ > 0 && !reaped_) ::kill(pid_, SIGTERM);
    }

    void kill_now() {
        if (pid_ > 0 && !reaped_) {
            ::kill(pid_, SIGKILL);
            int status = 0;
            ::waitpid(pid_, &status, 0);
            reaped_ = true;
        }
    }

    void close_output() {
        if (out_fd_ >= 0) {
            ::close(out_fd_);
            out_fd_ = -1;
        }
    }

private:
    pid_t pid_ = -1;
    int out_fd_ = -1;
    std::string partial_;
    bool eof_ = false;
    bool reaped_ = false;
};

/// Scratch directory that cleans itself up; holds bound-tightened problem
/// files handed to relaunched solvers.
class TempDir {
public:
    TempDir() = default;
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    ~TempDir() {
        if (!path_.empty()) {
            std::error_code ec;
            std::filesystem::remove_all(path_, ec);
        }
    }

    const std::string& path() const {
        if (path_.empty()) {
            std::string templ = (std::filesystem::temp_directory_path() / "portfolio-XXXXXX").string();
            std::vector<char> buf(templ.begin(), templ.end());
            buf.push_back('\0');
            if (!::mkdtemp(buf.data())) throw Error("cannot create temp directory");
            path_.assign(buf.data());
        }
        return path_;
    }

private:
    mutable std::string path_;  // created on first use, even from const holders
};

}  // namespace sunny
