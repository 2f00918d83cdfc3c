#include <cmath>
#include <cstring>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "socsim/errors.hpp"
#include "socsim/sonify/wav.hpp"

using soc::sonify::decode_wav;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

void put16(std::string& s, std::uint16_t v) {
    s.push_back(char(v & 0xFF));
    s.push_back(char(v >> 8));
}
void put32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xFF));
}
void put_float(std::string& s, float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put32(s, u);
}

// Stereo float32 file; extensible selects WAVE_FORMAT_EXTENSIBLE.
std::string float_stereo(const std::vector<std::pair<float, float>>& frames, bool extensible) {
    std::string fmt;
    put16(fmt, extensible ? 0xFFFE : 3);
    put16(fmt, 2);
    put32(fmt, 44100);
    put32(fmt, 44100 * 8);
    put16(fmt, 8);
    put16(fmt, 32);
    if (extensible) {
        put16(fmt, 22);
        put16(fmt, 32);
        put32(fmt, 3);
        put16(fmt, 3);  // KSDATAFORMAT_SUBTYPE_IEEE_FLOAT, first two bytes
        fmt.append(14, '\0');
    }
    std::string data;
    for (auto [l, r] : frames) {
        put_float(data, l);
        put_float(data, r);
    }
    std::string out = "RIFF";
    put32(out, std::uint32_t(4 + 8 + fmt.size() + 8 + data.size()));
    out += "WAVEfmt ";
    put32(out, std::uint32_t(fmt.size()));
    out += fmt;
    out += "data";
    put32(out, std::uint32_t(data.size()));
    out += data;
    return out;
}

}  // namespace

TEST_CASE("wav: 1 s 440 Hz sine round-trips within 16-bit quantization") {
    std::vector<float> x(48000);
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = float(0.9 * std::sin(2 * std::numbers::pi * 440.0 * double(i) / 48000.0));
    const auto path = std::filesystem::temp_directory_path() / "socsim_wav_roundtrip.wav";
    soc::sonify::write_wav(path, x, 48000);
    const auto back = soc::sonify::read_wav(path);
    std::filesystem::remove(path);
    CHECK(back.sample_rate == 48000);
    REQUIRE(back.samples.size() == x.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, double(std::abs(back.samples[i] - x[i])));
    CHECK(worst <= 1.0 / 32768.0);
}

TEST_CASE("wav: full-scale and out-of-range samples clamp") {
    const std::vector<float> x = {1.0f, -1.0f, 2.0f, -3.0f, 0.0f};
    const auto a = decode_wav(bytes_of(soc::sonify::encode_wav(x, 8000)));
    CHECK(a.samples[0] == doctest::Approx(32767.0 / 32768.0));
    CHECK(a.samples[1] == -1.0f);
    CHECK(a.samples[2] == doctest::Approx(32767.0 / 32768.0));
    CHECK(a.samples[3] == -1.0f);
    CHECK(a.samples[4] == 0.0f);
}

TEST_CASE("wav: header layout") {
    const std::vector<float> x(10, 0.25f);
    const std::string w = soc::sonify::encode_wav(x, 22050);
    CHECK(w.size() == 44 + 20);
    CHECK(w.substr(0, 4) == "RIFF");
    CHECK(w.substr(8, 8) == "WAVEfmt ");
    CHECK(w.substr(36, 4) == "data");
}

TEST_CASE("wav: truncated header is a parse error") {
    const std::string w = soc::sonify::encode_wav(std::vector<float>(4, 0.0f), 8000);
    for (std::size_t cut : {0, 3, 10, 20, 30, 40}) {
        const auto b = bytes_of(w.substr(0, cut));
        CHECK_THROWS_AS(decode_wav(b), soc::ParseError);
    }
    try {
        decode_wav(bytes_of(w.substr(0, 30)));
        FAIL("expected ParseError");
    } catch (const soc::ParseError& e) {
        CHECK(e.offset() <= 30);
    }
}

TEST_CASE("wav: malformed fields report their byte offset") {
    std::string w = soc::sonify::encode_wav(std::vector<float>(4, 0.0f), 8000);
    std::string bad = w;
    bad[0] = 'X';
    try {
        decode_wav(bytes_of(bad));
        FAIL("expected ParseError");
    } catch (const soc::ParseError& e) {
        CHECK(e.offset() == 0);
    }
    bad = w;
    bad[34] = 24;  // 24-bit PCM is not supported
    try {
        decode_wav(bytes_of(bad));
        FAIL("expected ParseError");
    } catch (const soc::ParseError& e) {
        CHECK(e.offset() == 20);
    }
    bad = w;
    bad[40] = 100;  // data chunk longer than the file
    try {
        decode_wav(bytes_of(bad));
        FAIL("expected ParseError");
    } catch (const soc::ParseError& e) {
        CHECK(e.offset() == 40);
    }
}

TEST_CASE("wav: 32-bit float stereo averages to mono") {
    for (bool ext : {false, true}) {
        const auto a = decode_wav(bytes_of(float_stereo({{0.2f, 0.4f}, {0.2f, 0.4f}, {-1.0f, 1.0f}}, ext)));
        CHECK(a.sample_rate == 44100);
        REQUIRE(a.samples.size() == 3);
        CHECK(a.samples[0] == doctest::Approx(0.3).epsilon(1e-7));
        CHECK(a.samples[1] == doctest::Approx(0.3).epsilon(1e-7));
        CHECK(a.samples[2] == 0.0f);
    }
}

TEST_CASE("wav: unknown and odd-sized chunks are skipped") {
    const std::string w = soc::sonify::encode_wav(std::vector<float>{0.5f, -0.5f}, 8000);
    std::string with_list = w.substr(0, 12);
    with_list += "LIST";
    put32(with_list, 3);
    with_list += "abc";
    with_list.push_back('\0');  // pad byte
    with_list += w.substr(12);
    const auto a = decode_wav(bytes_of(with_list));
    REQUIRE(a.samples.size() == 2);
    CHECK(a.samples[0] == 0.5f);
    CHECK(a.samples[1] == -0.5f);
}

TEST_CASE("wav: missing file is an I/O error") {
    CHECK_THROWS_AS(soc::sonify::read_wav("/nonexistent/socsim.wav"), std::ios_base::failure);
}
