#include "stereoforge/error.hpp"

namespace stereoforge {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MalformedWav: return "MalformedWav";
        case ErrorCode::UnsupportedEncoding: return "UnsupportedEncoding";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::ChannelCountMismatch: return "ChannelCountMismatch";
        case ErrorCode::SampleRateMismatch: return "SampleRateMismatch";
        case ErrorCode::OutOfBounds: return "OutOfBounds";
        case ErrorCode::EmptyBuffer: return "EmptyBuffer";
        case ErrorCode::MalformedAnnotation: return "MalformedAnnotation";
        case ErrorCode::SpeakerCountError: return "SpeakerCountError";
        case ErrorCode::BackendFailure: return "BackendFailure";
        case ErrorCode::Timeout: return "Timeout";
        case ErrorCode::TooShort: return "TooShort";
        case ErrorCode::SpawnError: return "SpawnError";
        case ErrorCode::HandshakeTimeout: return "HandshakeTimeout";
        case ErrorCode::ProtocolVersionMismatch: return "ProtocolVersionMismatch";
        case ErrorCode::InsufficientSoloSpeech: return "InsufficientSoloSpeech";
        case ErrorCode::MalformedIntervals: return "MalformedIntervals";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::InvalidScript: return "InvalidScript";
        case ErrorCode::EmptyManifest: return "EmptyManifest";
        case ErrorCode::NotStereo: return "NotStereo";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
    }
    return "Unknown";
}

} // namespace stereoforge
