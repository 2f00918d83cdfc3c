#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace soc::sonify {

struct Audio {
    std::vector<float> samples;  // mono, nominally in [-1, 1]
    int sample_rate = 48000;
};

/// RIFF/WAVE, 16-bit PCM little-endian mono. Samples are clamped to [-1, 1].
void write_wav(const std::filesystem::path& path, std::span<const float> samples, int sample_rate);
std::string encode_wav(std::span<const float> samples, int sample_rate);

/// Accepts 16-bit PCM and 32-bit IEEE float (plain or WAVE_FORMAT_EXTENSIBLE),
/// any channel count; channels are averaged to mono. Throws ParseError with
/// the byte offset of the first malformed field.
Audio read_wav(const std::filesystem::path& path);
Audio decode_wav(std::span<const std::uint8_t> bytes);

}  // namespace soc::sonify
