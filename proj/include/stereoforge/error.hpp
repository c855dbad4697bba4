#pragma once

#include <stdexcept>
#include <string>

namespace stereoforge {

enum class ErrorCode {
    MalformedWav,
    UnsupportedEncoding,
    IoError,
    ChannelCountMismatch,
    SampleRateMismatch,
    OutOfBounds,
    EmptyBuffer,
    MalformedAnnotation,
    SpeakerCountError,
    BackendFailure,
    Timeout,
    TooShort,
    SpawnError,
    HandshakeTimeout,
    ProtocolVersionMismatch,
    InsufficientSoloSpeech,
    MalformedIntervals,
    EmptyCorpus,
    InvalidScript,
    EmptyManifest,
    NotStereo,
    InvalidConfig,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace stereoforge
