#pragma once

#include "stereoforge/backends.hpp"
#include "stereoforge/error.hpp"

#include <json.hpp>

#include <sys/types.h>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace stereoforge {

inline constexpr int kProtocolVersion = 1;

// Scratch location for audio exchanged with external backends (STEREOFORGE_TMPDIR or the system temp dir).
std::filesystem::path temp_root();

// A child running `/bin/sh -c <command>` with its stdin/stdout connected to pipes.
class ChildProcess {
public:
    enum class ReadStatus { Line, Timeout, Eof };

    explicit ChildProcess(const std::string& command_line);
    ~ChildProcess();
    ChildProcess(const ChildProcess&) = delete;
    ChildProcess& operator=(const ChildProcess&) = delete;

    pid_t pid() const { return pid_; }
    bool write_line(const std::string& line);
    ReadStatus read_line(std::string& line, std::chrono::milliseconds timeout);
    void kill();

private:
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
};

class BackendError : public Error {
public:
    BackendError(ErrorCode code, uint64_t request_id, const std::string& message)
        : Error(code, "request " + std::to_string(request_id) + ": " + message), request_id_(request_id) {}
    uint64_t request_id() const { return request_id_; }

private:
    uint64_t request_id_;
};

// Client side of the newline-delimited JSON protocol. One request in flight at a time.
class ExternalBackend {
public:
    ExternalBackend(BackendDescriptor descriptor, std::chrono::milliseconds request_timeout,
                    std::chrono::milliseconds handshake_timeout);
    ~ExternalBackend();

    BackendKind kind() const { return descriptor_.kind; }
    const BackendDescriptor& descriptor() const { return descriptor_; }

    // Sends {"id", "op", ...fields} and returns the full success response.
    nlohmann::json request(const std::string& op, nlohmann::json fields);

    // A fresh path inside this backend's scratch directory.
    std::filesystem::path scratch_path(const std::string& stem, const std::string& ext);
    const std::filesystem::path& scratch_dir() const { return scratch_; }

private:
    void start();

    BackendDescriptor descriptor_;
    std::chrono::milliseconds request_timeout_;
    std::chrono::milliseconds handshake_timeout_;
    std::unique_ptr<ChildProcess> child_;
    std::filesystem::path scratch_;
    std::mutex mutex_;
    uint64_t next_id_ = 1;
    uint64_t next_file_ = 0;
};

class ExternalDiarizer final : public Diarizer {
public:
    ExternalDiarizer(std::shared_ptr<ExternalBackend> backend, int64_t merge_gap)
        : backend_(std::move(backend)), merge_gap_(merge_gap) {}
    DiarizationAnnotation diarize(const AudioBuffer& audio, const RecordingContext& ctx = {}) override;

private:
    std::shared_ptr<ExternalBackend> backend_;
    int64_t merge_gap_;
};

class ExternalSeparator final : public Separator {
public:
    explicit ExternalSeparator(std::shared_ptr<ExternalBackend> backend) : backend_(std::move(backend)) {}
    SeparatedPair separate(const AudioBuffer& segment) override;

private:
    std::shared_ptr<ExternalBackend> backend_;
};

class ExternalVerifier final : public Verifier {
public:
    explicit ExternalVerifier(std::shared_ptr<ExternalBackend> backend) : backend_(std::move(backend)) {}
    SimilarityScore verify(const AudioBuffer& reference, const AudioBuffer& candidate) override;

private:
    std::shared_ptr<ExternalBackend> backend_;
};

std::shared_ptr<ExternalBackend> spawn_external_backend(const BackendDescriptor& descriptor,
                                                        std::chrono::milliseconds request_timeout,
                                                        std::chrono::milliseconds handshake_timeout);

} // namespace stereoforge
