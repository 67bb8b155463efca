#include "orchard/detector.hpp"
#include "orchard/error.hpp"

#include <json.hpp>

#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <mutex>

extern char** environ;

namespace orchard {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

// One child process speaking the line protocol on its stdin/stdout.
class Child {
public:
    explicit Child(const std::vector<std::string>& argv)
    {
        int to_child[2], from_child[2];
        if (pipe(to_child) != 0)
            throw std::runtime_error(std::string("pipe: ") + std::strerror(errno));
        if (pipe(from_child) != 0) {
            close(to_child[0]);
            close(to_child[1]);
            throw std::runtime_error(std::string("pipe: ") + std::strerror(errno));
        }

        posix_spawn_file_actions_t actions;
        posix_spawn_file_actions_init(&actions);
        posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
        posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
        for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]})
            posix_spawn_file_actions_addclose(&actions, fd);

        std::vector<char*> args;
        for (const auto& a : argv)
            args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);

        const int rc = posix_spawnp(&pid_, args[0], &actions, nullptr, args.data(), environ);
        posix_spawn_file_actions_destroy(&actions);
        close(to_child[0]);
        close(from_child[1]);
        in_ = to_child[1];
        out_ = from_child[0];
        if (rc != 0) {
            close(in_);
            close(out_);
            pid_ = -1;
            throw std::runtime_error("cannot start detector '" + argv[0] +
                                     "': " + std::strerror(rc));
        }
    }

    Child(const Child&) = delete;
    Child& operator=(const Child&) = delete;

    ~Child()
    {
        if (pid_ <= 0)
            return;
        try {
            write_line(R"({"op":"shutdown"})");
        } catch (...) {
        }
        close(in_);
        // Give the child a moment to exit cleanly before forcing it.
        const auto deadline = Clock::now() + std::chrono::milliseconds(2000);
        int status = 0;
        while (waitpid(pid_, &status, WNOHANG) == 0) {
            if (Clock::now() > deadline) {
                kill(pid_, SIGKILL);
                waitpid(pid_, &status, 0);
                break;
            }
            usleep(1000);
        }
        close(out_);
    }

    void write_line(const std::string& line)
    {
        std::string buf = line + "\n";
        std::size_t off = 0;
        while (off < buf.size()) {
            const ssize_t n = write(in_, buf.data() + off, buf.size() - off);
            if (n < 0) {
                if (errno == EINTR)
                    continue;
                throw ProtocolError("detector closed its input", line);
            }
            off += std::size_t(n);
        }
    }

    /// Next line from the child, without the newline. Throws ProtocolError
    /// on timeout or end of stream.
    std::string read_line(int timeout_ms)
    {
        const auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);
        for (;;) {
            if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return line;
            }
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  deadline - Clock::now())
                                  .count();
            if (left <= 0)
                throw ProtocolError("detector timed out after " + std::to_string(timeout_ms) +
                                        " ms",
                                    buffer_);
            pollfd pfd{out_, POLLIN, 0};
            const int rc = poll(&pfd, 1, int(left));
            if (rc < 0 && errno == EINTR)
                continue;
            if (rc <= 0)
                continue;
            char chunk[4096];
            const ssize_t n = read(out_, chunk, sizeof chunk);
            if (n < 0 && errno == EINTR)
                continue;
            if (n <= 0)
                throw ProtocolError("detector closed its output", buffer_);
            buffer_.append(chunk, std::size_t(n));
        }
    }

private:
    pid_t pid_ = -1;
    int in_ = -1;
    int out_ = -1;
    std::string buffer_;
};

json parse_reply(const std::string& line)
{
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error&) {
        throw ProtocolError("detector reply is not JSON", line);
    }
    if (!j.is_object() || !j.contains("ok") || !j["ok"].is_boolean())
        throw ProtocolError("detector reply lacks a boolean \"ok\"", line);
    return j;
}

class ExternalDetector final : public Detector {
public:
    explicit ExternalDetector(const ExternalCommand& cmd) : cmd_(cmd)
    {
        if (cmd_.argv.empty())
            throw InvalidArgument("external detector needs a command");
        if (cmd_.pool_size < 1)
            throw InvalidArgument("external detector pool size must be >= 1");
        // A child dying mid-write must surface as an error, not kill us.
        signal(SIGPIPE, SIG_IGN);
        for (int i = 0; i < cmd_.pool_size; ++i) {
            children_.push_back(std::make_unique<Child>(cmd_.argv));
            handshake(*children_.back());
            idle_.push_back(children_.back().get());
        }
    }

    std::vector<Detection> detect(const DetectRequest& req) override
    {
        Child* child = acquire();
        struct Release {
            ExternalDetector* self;
            Child* c;
            ~Release() { self->release(c); }
        } release{this, child};

        std::int64_t id;
        {
            std::lock_guard lock(mutex_);
            id = next_id_++;
        }
        const json request = {{"op", "detect"},
                              {"id", id},
                              {"image", req.image_path},
                              {"rect",
                               {req.rect.x_min, req.rect.y_min, req.rect.width(),
                                req.rect.height()}}};
        child->write_line(request.dump());
        const std::string line = child->read_line(cmd_.request_timeout_ms);
        const json reply = parse_reply(line);
        if (!reply.contains("id") || !reply["id"].is_number_integer() ||
            reply["id"].get<std::int64_t>() != id)
            throw ProtocolError("detector reply id does not match request " + std::to_string(id),
                                line);
        if (!reply["ok"].get<bool>()) {
            const std::string msg =
                reply.contains("error") && reply["error"].is_string() ? reply["error"].get<std::string>()
                                                                      : "unspecified error";
            throw DetectorFailure("detector failed on '" + req.image_id + "': " + msg);
        }
        if (!reply.contains("detections") || !reply["detections"].is_array())
            throw ProtocolError("detector reply lacks a \"detections\" array", line);

        const Box local{0.0, 0.0, req.rect.width(), req.rect.height()};
        std::vector<Detection> out;
        for (const auto& d : reply["detections"]) {
            if (!d.is_object() || !d.contains("box") || !d["box"].is_array() ||
                d["box"].size() != 4 || !d.contains("score") || !d["score"].is_number())
                throw ProtocolError("malformed detection in reply", line);
            for (const auto& v : d["box"])
                if (!v.is_number())
                    throw ProtocolError("malformed detection in reply", line);
            Detection det;
            det.box = {d["box"][0].get<double>(), d["box"][1].get<double>(),
                       d["box"][2].get<double>(), d["box"][3].get<double>()};
            det.score = d["score"].get<double>();
            if (d.contains("label") && d["label"].is_string())
                det.label = d["label"].get<std::string>();
            if (!det.box.valid() || !(det.score >= 0.0 && det.score <= 1.0))
                throw ProtocolError("detection out of range in reply", line);
            if (auto c = clip_box(det.box, local)) {
                det.box = *c;
                out.push_back(std::move(det));
            }
        }
        sort_canonical(out);
        return out;
    }

private:
    void handshake(Child& child)
    {
        child.write_line(R"({"op":"hello"})");
        const std::string line = child.read_line(cmd_.handshake_timeout_ms);
        const json reply = parse_reply(line);
        if (!reply["ok"].get<bool>())
            throw ProtocolError("detector rejected the handshake", line);
        if (!reply.contains("name") || !reply["name"].is_string() || !reply.contains("version") ||
            !reply["version"].is_string())
            throw ProtocolError("handshake reply needs string \"name\" and \"version\"", line);
    }

    Child* acquire()
    {
        std::unique_lock lock(mutex_);
        idle_cv_.wait(lock, [&] { return !idle_.empty(); });
        Child* c = idle_.back();
        idle_.pop_back();
        return c;
    }

    void release(Child* c)
    {
        {
            std::lock_guard lock(mutex_);
            idle_.push_back(c);
        }
        idle_cv_.notify_one();
    }

    ExternalCommand cmd_;
    std::vector<std::unique_ptr<Child>> children_;
    std::vector<Child*> idle_;
    std::mutex mutex_;
    std::condition_variable idle_cv_;
    std::int64_t next_id_ = 1;
};

} // namespace

std::unique_ptr<Detector> make_external_detector(const ExternalCommand& cmd)
{
    return std::make_unique<ExternalDetector>(cmd);
}

} // namespace orchard
