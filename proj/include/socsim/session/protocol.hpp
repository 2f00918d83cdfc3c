// Session wire protocol: one JSON object per line, {"t": type, "k": tick, ...}.
//
// encode() writes fields in a fixed order, so decode followed by encode
// reproduces any line that encode produced. Unknown fields are ignored on
// decode; unknown types are rejected.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "socsim/cascade.hpp"
#include "socsim/sonify/schedule.hpp"

namespace soc::session {

inline constexpr int kProtocolVersion = 1;

struct Hello {
    std::string server = "socsim";
    int protocol = kProtocolVersion;
    friend bool operator==(const Hello&, const Hello&) = default;
};

struct ConfigMsg {
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    friend bool operator==(const ConfigMsg&, const ConfigMsg&) = default;
};

struct TickMsg {
    std::uint64_t events = 0;  // events of size >= 1 this tick
    std::uint64_t size = 0;    // topplings or slips this tick
    double load = 0.0;         // grains on the pile, or total block force
    double rate = 0.0;         // grains or force per tick
    std::array<double, 2> v{};
    bool paused = false;
    friend bool operator==(const TickMsg&, const TickMsg&) = default;
};

struct EventMsg {
    CascadeEvent event;
    bool has_moment = false;  // spring-block events carry a seismic moment
    friend bool operator==(const EventMsg&, const EventMsg&) = default;
};

struct GrainsMsg {
    std::uint64_t event_id = 0;
    std::vector<sonify::GrainEntry> entries;
    friend bool operator==(const GrainsMsg&, const GrainsMsg&) = default;
};

struct StatsMsg {
    std::uint64_t events = 0;
    std::uint64_t max_size = 0;
    double decades = 0.0;
    std::uint64_t s_min = 1;
    std::optional<double> tau;
    std::optional<double> std_error;
    std::vector<std::array<double, 2>> histogram;  // (bin_center, density)
    friend bool operator==(const StatsMsg&, const StatsMsg&) = default;
};

struct SetDrive {
    std::array<double, 2> v{};
    friend bool operator==(const SetDrive&, const SetDrive&) = default;
};

struct Drop {
    std::uint64_t n = 1;
    std::optional<Coord> site;
    friend bool operator==(const Drop&, const Drop&) = default;
};

struct Pause {
    bool paused = true;
    friend bool operator==(const Pause&, const Pause&) = default;
};

struct Reset {
    friend bool operator==(const Reset&, const Reset&) = default;
};

struct Stop {
    friend bool operator==(const Stop&, const Stop&) = default;
};

struct ErrorMsg {
    std::string code;
    std::string message;
    friend bool operator==(const ErrorMsg&, const ErrorMsg&) = default;
};

struct Bye {
    std::string reason;
    friend bool operator==(const Bye&, const Bye&) = default;
};

using Body = std::variant<Hello, ConfigMsg, TickMsg, EventMsg, GrainsMsg, StatsMsg, SetDrive, Drop,
                          Pause, Reset, Stop, ErrorMsg, Bye>;

struct Message {
    std::uint64_t tick = 0;
    Body body;

    std::string_view type() const;
    bool is_control() const;
    template <typename T>
    bool is() const { return std::holds_alternative<T>(body); }
    template <typename T>
    const T& as() const { return std::get<T>(body); }

    friend bool operator==(const Message&, const Message&) = default;
};

/// Largest grain count accepted in one control.drop.
inline constexpr std::uint64_t kMaxDrop = 1'000'000;

/// One line, without the trailing newline.
std::string encode(const Message& msg);

/// Accepts a line with or without a trailing newline. Throws ProtocolError
/// with the byte range of the offending value (or of the whole line).
Message decode(std::string_view line);

/// Rounds log-derived reals to 10 significant digits so that libm
/// differences between platforms cannot leak into the byte stream.
double wire_round(double x);

}  // namespace soc::session
