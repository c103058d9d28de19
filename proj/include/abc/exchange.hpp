#pragma once

#include "abc/cantor.hpp"
#include "abc/maps.hpp"
#include "abc/numerics.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace abc {

enum class ExchangeVariant { C, D, E };
enum class CellFamily { Kept, Gap };
enum class Orientation { TranslateRescale, QuarterTurnCW };
enum class Stacking { Vertical, Horizontal };

const char* to_string(ExchangeVariant v);
const char* to_string(CellFamily f);
const char* to_string(Orientation o);

// One horizontal source strip [0,1) x [src_y0, src_y1) of a column, in column-relative
// coordinates (x spans the column width). Its s cells [m/s,(m+1)/s) x strip are sent onto
// equal slices of `target`, stacked along `stacking`.
struct ExchangeSegment {
    CellFamily family = CellFamily::Kept;
    int level = 0;            // n for kept strips, k for gaps
    std::uint64_t index = 0;  // l
    int half = -1;            // 0/1 for the split level-1 gap, -1 otherwise
    double src_y0 = 0.0, src_y1 = 0.0;
    Rect target;              // column-relative
    Stacking stacking = Stacking::Vertical;
    Orientation orientation = Orientation::TranslateRescale;
};

struct ExchangePiece {
    std::int64_t column = 0;
    std::int64_t cell = 0;     // m in [0, s)
    std::size_t segment = 0;
    Rect source, target;       // absolute coordinates
    Orientation orientation = Orientation::TranslateRescale;
};

// Measure-preserving rectangle exchange, identical in every 1/q column.
class RectExchange {
public:
    RectExchange(ExchangeVariant variant, int n, std::int64_t q, std::int64_t s, std::vector<ExchangeSegment> segs);

    TorusPoint eval(TorusPoint p) const;
    TorusPoint eval_inverse(TorusPoint p) const;
    Mat2 jacobian(TorusPoint p) const;
    Mat2 jacobian_inverse(TorusPoint p) const;

    ExchangeVariant variant() const { return variant_; }
    int n() const { return n_; }
    std::int64_t q() const { return q_; }
    std::int64_t s() const { return s_; }
    const std::vector<ExchangeSegment>& segments() const { return segs_; }

    Rect cell_source(std::int64_t column, std::size_t segment, std::int64_t m) const;
    Rect cell_target(std::int64_t column, std::size_t segment, std::int64_t m) const;
    // Segment index whose source strip contains y.
    std::size_t segment_at(double y) const;

    // Full piece table; refuses tables larger than max_pieces.
    std::vector<ExchangePiece> pieces(std::size_t max_pieces = 2000000) const;

    std::vector<std::string> notes;  // layout remarks (spilled strips, band scheme)

    nlohmann::json to_json() const;
    static RectExchange from_json(const nlohmann::json& j);

private:
    Rect rel_target(std::size_t segment, std::int64_t m) const;
    struct Located {
        std::int64_t column;
        std::size_t segment;
        std::int64_t m;
        double xi, eta;  // normalized coordinates inside the cell
    };
    Located locate_source(TorusPoint p) const;
    Located locate_target(TorusPoint p) const;
    Located locate_in_target(std::int64_t column, std::size_t seg, double u, double y) const;
    TorusPoint source_point(const Located& l) const;

    ExchangeVariant variant_;
    int n_;
    std::int64_t q_, s_;
    std::vector<ExchangeSegment> segs_;     // sorted by src_y0
    std::vector<std::size_t> by_target_x_;  // segment indices sorted by target.x0
};

RectExchange make_exchange_C(int n, std::int64_t q, std::int64_t s);
RectExchange make_exchange_D(int n, std::int64_t q, std::int64_t s, const CantorSpec& lambda);
RectExchange make_exchange_E(int n, std::int64_t q, std::int64_t s, const CantorSpec& lambda);
RectExchange build_exchange(ExchangeVariant v, int n, std::int64_t q, std::int64_t s, const CantorSpec& spec);

TorusPoint exchange_eval(const RectExchange& re, TorusPoint p);
TorusMap exchange_to_map(std::shared_ptr<const RectExchange> re);

// A source cell: column-cell index i1 in [0, s q), Cantor level and index. For the split
// level-1 gap of C/D, i2 selects the half.
struct CellIndex {
    CellFamily family = CellFamily::Kept;
    int level = 0;
    std::int64_t i1 = 0;
    std::uint64_t i2 = 0;
};

struct CellImage {
    std::int64_t j1 = 0, j2 = 0, j3 = -1;
    std::vector<Rect> targets;  // absolute; several only for poured strips of variant E
};

// Target cell computed straight from the index formulas, without a RectExchange.
CellImage perm_image_bruteforce(ExchangeVariant v, int n, std::int64_t q, std::int64_t s, const CantorSpec& spec,
                                const CellIndex& cell);

struct OracleComparison {
    std::int64_t cells = 0, mismatches = 0;
    double area_imbalance = 0.0;  // |source area - target area| + |source area - 1|
};

// Every piece of the table against perm_image_bruteforce, matched per source cell.
OracleComparison compare_with_oracle(const RectExchange& re, const CantorSpec& spec, std::size_t max_pieces = 2000000);

}  // namespace abc
