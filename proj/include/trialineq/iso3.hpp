#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "trialineq/error.hpp"

namespace trialineq {

namespace detail {

// ISO 3166-1 alpha-3 assigned codes, plus XKX (Kosovo, the World Bank
// convention used by the indicator sources this toolkit consumes).
inline constexpr std::array<std::string_view, 250> iso3_codes = {
    "ABW", "AFG", "AGO", "AIA", "ALA", "ALB", "AND", "ARE", "ARG", "ARM", "ASM", "ATA",
    "ATF", "ATG", "AUS", "AUT", "AZE", "BDI", "BEL", "BEN", "BES", "BFA", "BGD", "BGR",
    "BHR", "BHS", "BIH", "BLM", "BLR", "BLZ", "BMU", "BOL", "BRA", "BRB", "BRN", "BTN",
    "BVT", "BWA", "CAF", "CAN", "CCK", "CHE", "CHL", "CHN", "CIV", "CMR", "COD", "COG",
    "COK", "COL", "COM", "CPV", "CRI", "CUB", "CUW", "CXR", "CYM", "CYP", "CZE", "DEU",
    "DJI", "DMA", "DNK", "DOM", "DZA", "ECU", "EGY", "ERI", "ESH", "ESP", "EST", "ETH",
    "FIN", "FJI", "FLK", "FRA", "FRO", "FSM", "GAB", "GBR", "GEO", "GGY", "GHA", "GIB",
    "GIN", "GLP", "GMB", "GNB", "GNQ", "GRC", "GRD", "GRL", "GTM", "GUF", "GUM", "GUY",
    "HKG", "HMD", "HND", "HRV", "HTI", "HUN", "IDN", "IMN", "IND", "IOT", "IRL", "IRN",
    "IRQ", "ISL", "ISR", "ITA", "JAM", "JEY", "JOR", "JPN", "KAZ", "KEN", "KGZ", "KHM",
    "KIR", "KNA", "KOR", "KWT", "LAO", "LBN", "LBR", "LBY", "LCA", "LIE", "LKA", "LSO",
    "LTU", "LUX", "LVA", "MAC", "MAF", "MAR", "MCO", "MDA", "MDG", "MDV", "MEX", "MHL",
    "MKD", "MLI", "MLT", "MMR", "MNE", "MNG", "MNP", "MOZ", "MRT", "MSR", "MTQ", "MUS",
    "MWI", "MYS", "MYT", "NAM", "NCL", "NER", "NFK", "NGA", "NIC", "NIU", "NLD", "NOR",
    "NPL", "NRU", "NZL", "OMN", "PAK", "PAN", "PCN", "PER", "PHL", "PLW", "PNG", "POL",
    "PRI", "PRK", "PRT", "PRY", "PSE", "PYF", "QAT", "REU", "ROU", "RUS", "RWA", "SAU",
    "SDN", "SEN", "SGP", "SGS", "SHN", "SJM", "SLB", "SLE", "SLV", "SMR", "SOM", "SPM",
    "SRB", "SSD", "STP", "SUR", "SVK", "SVN", "SWE", "SWZ", "SXM", "SYC", "SYR", "TCA",
    "TCD", "TGO", "THA", "TJK", "TKL", "TKM", "TLS", "TON", "TTO", "TUN", "TUR", "TUV",
    "TWN", "TZA", "UGA", "UKR", "UMI", "URY", "USA", "UZB", "VAT", "VCT", "VEN", "VGB",
    "VIR", "VNM", "VUT", "WLF", "WSM", "XKX", "YEM", "ZAF", "ZMB", "ZWE",
};

} // namespace detail

/// 3-letter uppercase ISO3 identifier. Validation against the bundled code
/// list happens at ingestion; construction itself only enforces the A-Z shape
/// so synthetic aggregates (see `CountryCode::aggregate()`) remain usable.
class CountryCode {
  public:
    CountryCode() : code_{{'?', '?', '?'}} {}

    static CountryCode from_string(std::string_view s) {
        if (s.size() != 3) throw DataError("country code '" + std::string(s) + "' is not 3 characters");
        CountryCode c;
        for (int i = 0; i < 3; ++i) {
            char ch = s[i];
            if (ch >= 'a' && ch <= 'z') ch = static_cast<char>(ch - 'a' + 'A');
            if (ch < 'A' || ch > 'Z') throw DataError("country code '" + std::string(s) + "' contains non-letter");
            c.code_[static_cast<std::size_t>(i)] = ch;
        }
        return c;
    }

    /// Sentinel used by cross-country aggregation. Not an assigned ISO3 code,
    /// so real data can never collide with it.
    static CountryCode aggregate() {
        CountryCode c;
        c.code_ = {{'A', 'L', 'L'}};
        return c;
    }

    bool is_known_iso3() const {
        const std::string_view sv(code_.data(), 3);
        return std::binary_search(detail::iso3_codes.begin(), detail::iso3_codes.end(), sv);
    }

    std::string str() const { return std::string(code_.data(), 3); }
    std::string_view view() const { return std::string_view(code_.data(), 3); }

    std::uint32_t packed() const {
        return (std::uint32_t(std::uint8_t(code_[0])) << 16) |
               (std::uint32_t(std::uint8_t(code_[1])) << 8) |
               std::uint32_t(std::uint8_t(code_[2]));
    }

    friend bool operator==(const CountryCode&, const CountryCode&) = default;
    friend auto operator<=>(const CountryCode&, const CountryCode&) = default;

  private:
    std::array<char, 3> code_;
};

} // namespace trialineq
