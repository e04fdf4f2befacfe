#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vpr/common.hpp"

namespace vpr {

struct PlaceRecord {
    std::int64_t id = 0;
    double easting = 0.0;    // meters, planar
    double northing = 0.0;
    std::optional<double> heading;      // degrees in [0,360)
    std::optional<std::int64_t> frame;  // sequence frame index
    std::int64_t place_id = 0;
    std::string split;       // database | query | train
    std::string tensor_path; // image or descriptor file

    void validate() const {
        if (!std::isfinite(easting) || !std::isfinite(northing))
            throw data_error("record " + std::to_string(id) +
                             ": non-finite coordinates");
        if (heading && (*heading < 0.0 || *heading >= 360.0))
            throw data_error("record " + std::to_string(id) +
                             ": heading out of [0,360)");
    }
};

// The three ground-truth definitions used for Recall@N.
struct GroundTruthMode {
    enum class Kind { geo, frame, unique };
    Kind kind = Kind::geo;
    double dist_m = 25.0;       // geo: positional threshold
    double heading_deg = -1.0;  // geo: angular threshold; negative = off
    int frame_window = 10;      // frame: |delta| <= window

    void validate() const {
        if (kind == Kind::geo && dist_m <= 0.0)
            throw config_error("ground truth: distance threshold must be > 0");
        if (kind == Kind::frame && frame_window < 0)
            throw config_error("ground truth: frame window must be >= 0");
    }

    static GroundTruthMode parse(const std::string& text);
    std::string str() const;
};

bool is_true_match(const PlaceRecord& query, const PlaceRecord& candidate,
                   const GroundTruthMode& mode);

struct SearchHit {
    std::int64_t id = 0;
    double similarity = 0.0;
};

// Exhaustive cosine search over unit-norm descriptors; descending
// similarity, ties broken by ascending id. K larger than the database
// returns the full ranking.
std::vector<SearchHit> search_topk(
    const std::vector<std::vector<float>>& db_descriptors,
    const std::vector<std::int64_t>& db_ids, const std::vector<float>& query,
    int k);

struct RecallReport {
    std::vector<int> ns;
    std::vector<double> recalls_pct;  // aligned with ns
    int evaluated = 0;
    int excluded = 0;  // queries with no possible true match

    double at(int n) const {
        for (std::size_t i = 0; i < ns.size(); ++i)
            if (ns[i] == n) return recalls_pct[i];
        throw config_error("recall report does not contain N=" +
                           std::to_string(n));
    }
};

// rankings[q] is the ranked list of database ids for query q. Queries with
// no true match anywhere in the database are excluded and counted.
RecallReport recall_at_n(
    const std::vector<std::vector<std::int64_t>>& rankings,
    const std::vector<PlaceRecord>& queries,
    const std::vector<PlaceRecord>& database, const GroundTruthMode& mode,
    const std::vector<int>& ns = {1, 5, 10});

}  // namespace vpr
