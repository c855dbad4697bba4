#include "stereoforge/external.hpp"

#include "stereoforge/log.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <random>
#include <thread>

extern char** environ;

namespace stereoforge {

using nlohmann::json;

std::filesystem::path temp_root() {
    if (const char* env = std::getenv("STEREOFORGE_TMPDIR"); env && *env) return env;
    return std::filesystem::temp_directory_path();
}

namespace {

void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

} // namespace

ChildProcess::ChildProcess(const std::string& command_line) {
    ignore_sigpipe();
    int in_pipe[2], out_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw Error(ErrorCode::SpawnError, std::strerror(errno));
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw Error(ErrorCode::SpawnError, std::strerror(errno));
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

    std::string sh = "sh", dash_c = "-c", cmd = command_line;
    char* argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};
    // Own process group, so kill() also reaches whatever the shell started.
    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
    posix_spawnattr_setpgroup(&attr, 0);
    const int rc = ::posix_spawn(&pid_, "/bin/sh", &actions, &attr, argv, environ);
    posix_spawnattr_destroy(&attr);
    posix_spawn_file_actions_destroy(&actions);
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    if (rc != 0) {
        ::close(in_pipe[1]);
        ::close(out_pipe[0]);
        throw Error(ErrorCode::SpawnError, "cannot spawn '" + command_line + "': " + std::strerror(rc));
    }
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
}

ChildProcess::~ChildProcess() {
    if (to_child_ >= 0) ::close(to_child_);
    if (pid_ > 0) {
        // Closing stdin asks the child to exit; give it a moment before forcing it.
        for (int i = 0; i < 200; ++i) {
            int status = 0;
            if (::waitpid(pid_, &status, WNOHANG) == pid_) {
                pid_ = -1;
                break;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        if (pid_ > 0) kill();
    }
    if (from_child_ >= 0) ::close(from_child_);
}

void ChildProcess::kill() {
    if (pid_ <= 0) return;
    ::kill(-pid_, SIGKILL);
    ::kill(pid_, SIGKILL);
    int status = 0;
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
}

bool ChildProcess::write_line(const std::string& line) {
    std::string data = line + "\n";
    size_t off = 0;
    while (off < data.size()) {
        const ssize_t w = ::write(to_child_, data.data() + off, data.size() - off);
        if (w < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        off += size_t(w);
    }
    return true;
}

ChildProcess::ReadStatus ChildProcess::read_line(std::string& line, std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
            line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return ReadStatus::Line;
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) return ReadStatus::Timeout;
        pollfd pfd{from_child_, POLLIN, 0};
        const int pr = ::poll(&pfd, 1, int(std::min<int64_t>(left.count(), 1'000'000)));
        if (pr < 0) {
            if (errno == EINTR) continue;
            return ReadStatus::Eof;
        }
        if (pr == 0) continue;
        char chunk[4096];
        const ssize_t r = ::read(from_child_, chunk, sizeof chunk);
        if (r < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            return ReadStatus::Eof;
        }
        if (r == 0) return ReadStatus::Eof;
        buffer_.append(chunk, size_t(r));
    }
}

ExternalBackend::ExternalBackend(BackendDescriptor descriptor, std::chrono::milliseconds request_timeout,
                                 std::chrono::milliseconds handshake_timeout)
    : descriptor_(std::move(descriptor)), request_timeout_(request_timeout), handshake_timeout_(handshake_timeout) {
    if (descriptor_.transport != BackendDescriptor::Transport::External)
        throw Error(ErrorCode::InvalidConfig, "not an external descriptor: " + descriptor_.to_string());
    static std::atomic<uint64_t> counter{0};
    std::random_device rd;
    const auto tag = std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" + std::to_string(rd() % 1000000);
    scratch_ = temp_root() / ("stereoforge-" + tag);
    std::error_code ec;
    std::filesystem::create_directories(scratch_, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create scratch directory " + scratch_.string() + ": " + ec.message());
    start();
}

ExternalBackend::~ExternalBackend() {
    child_.reset();
    std::error_code ec;
    std::filesystem::remove_all(scratch_, ec);
}

void ExternalBackend::start() {
    child_ = std::make_unique<ChildProcess>(descriptor_.target);
    std::string line;
    ChildProcess::ReadStatus st;
    do {
        st = child_->read_line(line, handshake_timeout_);
    } while (st == ChildProcess::ReadStatus::Line && line.find_first_not_of(" \t\r") == std::string::npos);

    auto fail = [&](ErrorCode code, const std::string& why) {
        child_->kill();
        child_.reset();
        throw Error(code, descriptor_.to_string() + ": " + why);
    };
    if (st == ChildProcess::ReadStatus::Timeout) fail(ErrorCode::HandshakeTimeout, "no handshake within timeout");
    if (st == ChildProcess::ReadStatus::Eof) fail(ErrorCode::SpawnError, "process exited before handshake");

    json hs;
    try {
        hs = json::parse(line);
    } catch (const json::exception&) {
        fail(ErrorCode::BackendFailure, "handshake is not JSON: " + line);
    }
    if (!hs.is_object() || !hs.contains("proto") || !hs["proto"].is_number_integer())
        fail(ErrorCode::BackendFailure, "handshake lacks integer 'proto': " + line);
    if (hs["proto"].get<int64_t>() != kProtocolVersion)
        fail(ErrorCode::ProtocolVersionMismatch, "backend speaks protocol " + hs["proto"].dump() + ", expected " +
                                                     std::to_string(kProtocolVersion));
    if (!hs.contains("kind") || !hs["kind"].is_string() || hs["kind"].get<std::string>() != to_string(descriptor_.kind))
        fail(ErrorCode::BackendFailure, std::string("handshake kind does not match expected '") +
                                            to_string(descriptor_.kind) + "': " + line);
}

json ExternalBackend::request(const std::string& op, json fields) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!child_) {
        log::warn(descriptor_.to_string() + ": backend process is gone, starting a new one");
        start();
    }
    const uint64_t id = next_id_++;
    fields["id"] = id;
    fields["op"] = op;

    auto dead = [&](ErrorCode code, const std::string& why) {
        if (child_) child_->kill();
        child_.reset();
        return BackendError(code, id, descriptor_.to_string() + ": " + why);
    };
    if (!child_->write_line(fields.dump())) throw dead(ErrorCode::BackendFailure, "cannot write request (process exited)");

    std::string line;
    for (;;) {
        const auto st = child_->read_line(line, request_timeout_);
        if (st == ChildProcess::ReadStatus::Timeout) throw dead(ErrorCode::Timeout, "no response within timeout");
        if (st == ChildProcess::ReadStatus::Eof) throw dead(ErrorCode::BackendFailure, "process exited during request");
        if (line.find_first_not_of(" \t\r") != std::string::npos) break;
    }
    json resp;
    try {
        resp = json::parse(line);
    } catch (const json::exception&) {
        throw dead(ErrorCode::BackendFailure, "response is not JSON: " + line);
    }
    if (!resp.is_object() || !resp.contains("id") || !resp["id"].is_number_unsigned() || resp["id"].get<uint64_t>() != id)
        throw dead(ErrorCode::BackendFailure, "response id does not match: " + line);
    if (!resp.contains("ok") || !resp["ok"].is_boolean())
        throw dead(ErrorCode::BackendFailure, "response lacks boolean 'ok': " + line);
    if (!resp["ok"].get<bool>()) {
        const std::string msg = resp.contains("error") && resp["error"].is_string() ? resp["error"].get<std::string>()
                                                                                     : std::string("unspecified error");
        throw BackendError(ErrorCode::BackendFailure, id, descriptor_.to_string() + ": " + msg);
    }
    if (!resp.contains("result")) throw BackendError(ErrorCode::BackendFailure, id, "success response without result");
    return resp;
}

std::filesystem::path ExternalBackend::scratch_path(const std::string& stem, const std::string& ext) {
    std::lock_guard<std::mutex> lock(mutex_);
    return scratch_ / (stem + "-" + std::to_string(next_file_++) + ext);
}

namespace {

uint64_t response_id(const json& r) { return r.value("id", uint64_t(0)); }

struct ScopedFiles {
    std::vector<std::filesystem::path> paths;
    ~ScopedFiles() {
        std::error_code ec;
        for (const auto& p : paths) std::filesystem::remove_all(p, ec);
    }
};

} // namespace

DiarizationAnnotation ExternalDiarizer::diarize(const AudioBuffer& audio, const RecordingContext&) {
    require_canonical_mono(audio, "external diarizer");
    ScopedFiles files;
    const auto in = backend_->scratch_path("diarize", ".wav");
    files.paths.push_back(in);
    write_wav(audio, in, BitDepth::Float32);
    const auto resp = backend_->request("diarize", {{"audio", in.string()}});
    const auto& result = resp["result"];
    const uint64_t id = response_id(resp);
    if (!result.is_array()) throw BackendError(ErrorCode::BackendFailure, id, "diarize result must be an array");
    std::vector<SpeakerTurn> turns;
    const int64_t n = audio.frames();
    for (const auto& e : result) {
        if (!e.is_object() || !e.contains("speaker") || !e.contains("start_s") || !e.contains("end_s") ||
            !e["speaker"].is_string() || !e["start_s"].is_number() || !e["end_s"].is_number())
            throw BackendError(ErrorCode::BackendFailure, id, "malformed diarize entry: " + e.dump());
        const int64_t s = std::max<int64_t>(0, seconds_to_samples(e["start_s"].get<double>(), audio.sample_rate()));
        const int64_t t = std::min(n, seconds_to_samples(e["end_s"].get<double>(), audio.sample_rate()));
        if (t > s) turns.push_back({e["speaker"].get<std::string>(), {s, t}});
    }
    return normalize_annotation(std::move(turns), n, merge_gap_);
}

SeparatedPair ExternalSeparator::separate(const AudioBuffer& segment) {
    require_canonical_mono(segment, "external separator");
    ScopedFiles files;
    const auto in = backend_->scratch_path("separate", ".wav");
    const auto out_dir = backend_->scratch_path("separate", ".out");
    files.paths = {in, out_dir};
    write_wav(segment, in, BitDepth::Float32);
    std::filesystem::create_directories(out_dir);
    const auto resp = backend_->request("separate", {{"audio", in.string()}, {"out_dir", out_dir.string()}});
    const auto& result = resp["result"];
    const uint64_t id = response_id(resp);
    if (!result.is_object() || !result.contains("sep1") || !result.contains("sep2") || !result["sep1"].is_string() ||
        !result["sep2"].is_string())
        throw BackendError(ErrorCode::BackendFailure, id, "separate result must carry sep1/sep2 paths");

    auto load = [&](const std::string& path) {
        files.paths.emplace_back(path);
        AudioBuffer b;
        try {
            b = read_wav(path);
        } catch (const Error& e) {
            throw BackendError(ErrorCode::BackendFailure, id, std::string("cannot read separated output: ") + e.what());
        }
        if (b.channels() != 1 || b.sample_rate() != segment.sample_rate() || b.frames() != segment.frames())
            throw BackendError(ErrorCode::BackendFailure, id,
                               "separated output " + path + " has " + std::to_string(b.channels()) + " ch, " +
                                   std::to_string(b.frames()) + " samples @ " + std::to_string(b.sample_rate()) +
                                   " Hz; expected mono " + std::to_string(segment.frames()) + " @ " +
                                   std::to_string(segment.sample_rate()));
        return b;
    };
    auto first = load(result["sep1"].get<std::string>());
    auto second = load(result["sep2"].get<std::string>());
    return {std::move(first), std::move(second)};
}

SimilarityScore ExternalVerifier::verify(const AudioBuffer& reference, const AudioBuffer& candidate) {
    require_canonical_mono(reference, "external verifier");
    require_canonical_mono(candidate, "external verifier");
    ScopedFiles files;
    const auto a = backend_->scratch_path("verify", ".wav");
    const auto b = backend_->scratch_path("verify", ".wav");
    files.paths = {a, b};
    write_wav(reference, a, BitDepth::Float32);
    write_wav(candidate, b, BitDepth::Float32);
    const auto resp = backend_->request("verify", {{"audio", a.string()}, {"audio2", b.string()}});
    const auto& result = resp["result"];
    const uint64_t id = response_id(resp);
    if (!result.is_object() || !result.contains("similarity") || !result["similarity"].is_number())
        throw BackendError(ErrorCode::BackendFailure, id, "verify result must carry a numeric similarity");
    const double v = result["similarity"].get<double>();
    if (!(v >= -1.0 && v <= 1.0))
        throw BackendError(ErrorCode::BackendFailure, id, "similarity " + std::to_string(v) + " outside [-1, 1]");
    return {v};
}

std::shared_ptr<ExternalBackend> spawn_external_backend(const BackendDescriptor& descriptor,
                                                        std::chrono::milliseconds request_timeout,
                                                        std::chrono::milliseconds handshake_timeout) {
    return std::make_shared<ExternalBackend>(descriptor, request_timeout, handshake_timeout);
}

std::unique_ptr<Diarizer> make_diarizer(const BackendOptions& opts) {
    const auto& d = opts.diarizer;
    if (d.transport == BackendDescriptor::Transport::External)
        return std::make_unique<ExternalDiarizer>(
            spawn_external_backend(d, opts.request_timeout, opts.handshake_timeout), opts.merge_gap);
    if (d.target == "oracle") return std::make_unique<OracleDiarizer>(opts.merge_gap);
    auto params = opts.band_diarizer;
    params.merge_gap = opts.merge_gap;
    return std::make_unique<BandEnergyDiarizer>(params);
}

std::unique_ptr<Separator> make_separator(const BackendOptions& opts) {
    if (opts.separator.transport == BackendDescriptor::Transport::External)
        return std::make_unique<ExternalSeparator>(
            spawn_external_backend(opts.separator, opts.request_timeout, opts.handshake_timeout));
    return std::make_unique<BandSplitSeparator>(opts.band_split);
}

std::unique_ptr<Verifier> make_verifier(const BackendOptions& opts) {
    if (opts.verifier.transport == BackendDescriptor::Transport::External)
        return std::make_unique<ExternalVerifier>(
            spawn_external_backend(opts.verifier, opts.request_timeout, opts.handshake_timeout));
    return std::make_unique<BandEnergyVerifier>(opts.band_verifier);
}

BackendSet make_backends(const BackendOptions& opts) {
    BackendSet set;
    set.diarizer = make_diarizer(opts);
    set.separator = make_separator(opts);
    set.verifier = make_verifier(opts);
    set.any_external = opts.diarizer.transport == BackendDescriptor::Transport::External ||
                       opts.separator.transport == BackendDescriptor::Transport::External ||
                       opts.verifier.transport == BackendDescriptor::Transport::External;
    return set;
}

} // namespace stereoforge
