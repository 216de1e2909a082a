#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>

namespace reco {

// Calendar date. Storage elsewhere uses day counts relative to kEpoch
// (1998-01-01), the start of the rating collection window.
struct Date {
    int year = 0;
    int month = 0;
    int day = 0;

    bool operator==(const Date&) const = default;
};

namespace detail {
inline std::chrono::sys_days epoch_days() {
    using namespace std::chrono;
    return sys_days(year{1998} / 1 / 1);
}
}  // namespace detail

inline bool is_valid_date(const Date& d) {
    using namespace std::chrono;
    return (year{d.year} / d.month / d.day).ok();
}

// Days since 1998-01-01 (negative for earlier dates).
inline std::int32_t day_from_date(const Date& d) {
    using namespace std::chrono;
    const sys_days sd(year{d.year} / d.month / d.day);
    return static_cast<std::int32_t>((sd - detail::epoch_days()).count());
}

inline Date date_from_day(std::int32_t day_count) {
    using namespace std::chrono;
    const year_month_day ymd(detail::epoch_days() + days{day_count});
    return Date{int(ymd.year()), int(unsigned(ymd.month())), int(unsigned(ymd.day()))};
}

// Monday = 0 .. Sunday = 6.
inline int weekday_of_day(std::int32_t day_count) {
    using namespace std::chrono;
    const weekday wd(detail::epoch_days() + days{day_count});
    return static_cast<int>(wd.iso_encoding()) - 1;
}

// Parses strict "YYYY-MM-DD"; rejects invalid calendar dates.
std::optional<Date> parse_date(std::string_view text);

// Formats as "YYYY-MM-DD".
std::string format_date(const Date& d);

}  // namespace reco
