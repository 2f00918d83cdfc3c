#include "socsim/sonify/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "socsim/errors.hpp"

namespace soc::sonify {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

void put16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>(v >> 8));
}

void put32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

    void need(std::size_t n, const char* what) const {
        if (remaining() < n) throw ParseError(std::string("truncated ") + what, bytes_.size());
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + i];
        pos_ += 4;
        return v;
    }
    bool tag(const char* t) const {
        return remaining() >= 4 && std::memcmp(bytes_.data() + pos_, t, 4) == 0;
    }
    void skip(std::size_t n) { pos_ += n; }
    const std::uint8_t* here() const { return bytes_.data() + pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

struct Format {
    std::uint16_t tag = 0;
    std::uint16_t channels = 0;
    std::uint32_t rate = 0;
    std::uint16_t bits = 0;
};

}  // namespace

std::string encode_wav(std::span<const float> samples, int sample_rate) {
    if (sample_rate <= 0) throw DomainError("sample rate must be positive");
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    std::string out;
    out.reserve(44 + data_bytes);
    out += "RIFF";
    put32(out, 36 + data_bytes);
    out += "WAVEfmt ";
    put32(out, 16);
    put16(out, kFormatPcm);
    put16(out, 1);
    put32(out, static_cast<std::uint32_t>(sample_rate));
    put32(out, static_cast<std::uint32_t>(sample_rate) * 2);
    put16(out, 2);
    put16(out, 16);
    out += "data";
    put32(out, data_bytes);
    for (float x : samples) {
        if (!std::isfinite(x)) throw DomainError("non-finite sample");
        const double q = std::nearbyint(std::clamp(static_cast<double>(x), -1.0, 1.0) * 32768.0);
        put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0))));
    }
    return out;
}

void write_wav(const std::filesystem::path& path, std::span<const float> samples, int sample_rate) {
    const std::string bytes = encode_wav(samples, sample_rate);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::ios_base::failure("cannot open " + path.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::ios_base::failure("write failed: " + path.string());
}

Audio decode_wav(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    if (!r.tag("RIFF")) throw ParseError("missing RIFF tag", 0);
    r.skip(4);
    r.u32("RIFF size");
    if (!r.tag("WAVE")) throw ParseError("missing WAVE tag", 8);
    r.skip(4);

    Format fmt;
    bool have_fmt = false;
    while (r.remaining() > 0) {
        const std::size_t chunk_at = r.pos();
        r.need(8, "chunk header");
        const bool is_fmt = r.tag("fmt ");
        const bool is_data = r.tag("data");
        r.skip(4);
        const std::uint32_t len = r.u32("chunk size");
        if (r.remaining() < len) throw ParseError("chunk extends past end of file", chunk_at + 4);

        if (is_fmt) {
            if (len < 16) throw ParseError("fmt chunk too short", chunk_at + 4);
            const std::size_t body = r.pos();
            fmt.tag = r.u16("format tag");
            fmt.channels = r.u16("channel count");
            fmt.rate = r.u32("sample rate");
            r.u32("byte rate");
            r.u16("block align");
            fmt.bits = r.u16("bits per sample");
            if (fmt.tag == kFormatExtensible) {
                if (len < 40) throw ParseError("extensible fmt chunk too short", chunk_at + 4);
                r.skip(8);  // cbSize, valid bits, channel mask
                fmt.tag = r.u16("sub-format");
            }
            if (fmt.channels == 0) throw ParseError("zero channels", body + 2);
            if (fmt.rate == 0) throw ParseError("zero sample rate", body + 4);
            const bool pcm16 = fmt.tag == kFormatPcm && fmt.bits == 16;
            const bool float32 = fmt.tag == kFormatFloat && fmt.bits == 32;
            if (!pcm16 && !float32)
                throw ParseError("unsupported encoding (need 16-bit PCM or 32-bit float)", body);
            have_fmt = true;
            r.skip(len - (r.pos() - body));
        } else if (is_data) {
            if (!have_fmt) throw ParseError("data chunk before fmt chunk", chunk_at);
            const std::size_t width = fmt.bits / 8;
            const std::size_t frame = width * fmt.channels;
            if (len % frame != 0) throw ParseError("data size is not a whole number of frames", chunk_at + 4);
            const std::size_t frames = len / frame;
            Audio audio;
            audio.sample_rate = static_cast<int>(fmt.rate);
            audio.samples.resize(frames);
            const std::uint8_t* p = r.here();
            for (std::size_t i = 0; i < frames; ++i) {
                double sum = 0.0;
                for (std::size_t c = 0; c < fmt.channels; ++c, p += width) {
                    if (width == 2) {
                        const auto v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
                        sum += v / 32768.0;
                    } else {
                        std::uint32_t u = static_cast<std::uint32_t>(p[0]) | (p[1] << 8) |
                                          (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
                        float f;
                        std::memcpy(&f, &u, 4);
                        sum += f;
                    }
                }
                audio.samples[i] = static_cast<float>(sum / fmt.channels);
            }
            return audio;
        } else {
            r.skip(len);
        }
        if (len % 2 == 1 && r.remaining() > 0) r.skip(1);
    }
    throw ParseError(have_fmt ? "no data chunk" : "no fmt chunk", bytes.size());
}

Audio read_wav(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::ios_base::failure("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_wav(bytes);
}

}  // namespace soc::sonify
