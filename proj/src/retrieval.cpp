#include "vpr/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace vpr {

GroundTruthMode GroundTruthMode::parse(const std::string& text) {
    GroundTruthMode mode;
    auto split = [](const std::string& s) {
        std::vector<std::string> parts;
        std::size_t pos = 0;
        while (pos <= s.size()) {
            const std::size_t next = s.find(':', pos);
            if (next == std::string::npos) {
                parts.push_back(s.substr(pos));
                break;
            }
            parts.push_back(s.substr(pos, next - pos));
            pos = next + 1;
        }
        return parts;
    };
    const auto parts = split(text);
    try {
        if (parts[0] == "geo") {
            mode.kind = Kind::geo;
            if (parts.size() > 1) mode.dist_m = std::stod(parts[1]);
            if (parts.size() > 2) mode.heading_deg = std::stod(parts[2]);
            if (parts.size() > 3) throw config_error("");
        } else if (parts[0] == "frame") {
            mode.kind = Kind::frame;
            if (parts.size() > 1) mode.frame_window = std::stoi(parts[1]);
            if (parts.size() > 2) throw config_error("");
        } else if (parts[0] == "unique") {
            mode.kind = Kind::unique;
            if (parts.size() > 1) throw config_error("");
        } else {
            throw config_error("");
        }
    } catch (const std::exception&) {
        throw config_error("ground truth mode '" + text +
                           "' not understood; expected geo[:dist[:heading]], "
                           "frame[:window] or unique");
    }
    mode.validate();
    return mode;
}

std::string GroundTruthMode::str() const {
    switch (kind) {
        case Kind::geo: {
            std::string s = "geo:" + std::to_string(dist_m);
            if (heading_deg >= 0.0) s += ":" + std::to_string(heading_deg);
            return s;
        }
        case Kind::frame:
            return "frame:" + std::to_string(frame_window);
        case Kind::unique:
            return "unique";
    }
    return "?";
}

bool is_true_match(const PlaceRecord& query, const PlaceRecord& candidate,
                   const GroundTruthMode& mode) {
    switch (mode.kind) {
        case GroundTruthMode::Kind::geo: {
            const double de = query.easting - candidate.easting;
            const double dn = query.northing - candidate.northing;
            if (std::sqrt(de * de + dn * dn) > mode.dist_m) return false;
            if (mode.heading_deg >= 0.0) {
                if (!query.heading || !candidate.heading) return false;
                double diff = std::fabs(*query.heading - *candidate.heading);
                diff = std::min(diff, 360.0 - diff);
                if (diff > mode.heading_deg) return false;
            }
            return true;
        }
        case GroundTruthMode::Kind::frame: {
            if (!query.frame || !candidate.frame) return false;
            return std::llabs(*query.frame - *candidate.frame) <=
                   mode.frame_window;
        }
        case GroundTruthMode::Kind::unique:
            return query.place_id == candidate.place_id;
    }
    return false;
}

std::vector<SearchHit> search_topk(
    const std::vector<std::vector<float>>& db_descriptors,
    const std::vector<std::int64_t>& db_ids, const std::vector<float>& query,
    int k) {
    if (db_descriptors.size() != db_ids.size())
        throw dimension_error("search_topk: ids/descriptors count mismatch");
    std::vector<SearchHit> hits;
    hits.reserve(db_descriptors.size());
    for (std::size_t i = 0; i < db_descriptors.size(); ++i) {
        const auto& d = db_descriptors[i];
        if (d.size() != query.size())
            throw dimension_error(
                "search_topk: descriptor width mismatch at id " +
                std::to_string(db_ids[i]));
        double acc = 0.0;
        for (std::size_t q = 0; q < d.size(); ++q)
            acc += static_cast<double>(d[q]) * static_cast<double>(query[q]);
        hits.push_back({db_ids[i], acc});
    }
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.id < b.id;
    });
    if (k > 0 && static_cast<std::size_t>(k) < hits.size()) hits.resize(
        static_cast<std::size_t>(k));
    return hits;
}

RecallReport recall_at_n(
    const std::vector<std::vector<std::int64_t>>& rankings,
    const std::vector<PlaceRecord>& queries,
    const std::vector<PlaceRecord>& database, const GroundTruthMode& mode,
    const std::vector<int>& ns) {
    mode.validate();
    if (rankings.size() != queries.size())
        throw dimension_error("recall_at_n: rankings/queries count mismatch");
    std::unordered_map<std::int64_t, const PlaceRecord*> by_id;
    for (const auto& r : database) by_id[r.id] = &r;

    RecallReport report;
    report.ns = ns;
    report.recalls_pct.assign(ns.size(), 0.0);
    std::vector<int> hits(ns.size(), 0);

    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const auto& q = queries[qi];
        bool possible = false;
        for (const auto& r : database) {
            if (is_true_match(q, r, mode)) {
                possible = true;
                break;
            }
        }
        if (!possible) {
            ++report.excluded;
            continue;
        }
        ++report.evaluated;
        int first_match_rank = -1;
        for (std::size_t rank = 0; rank < rankings[qi].size(); ++rank) {
            auto it = by_id.find(rankings[qi][rank]);
            if (it == by_id.end())
                throw data_error("recall_at_n: ranked id " +
                                 std::to_string(rankings[qi][rank]) +
                                 " not in database");
            if (is_true_match(q, *it->second, mode)) {
                first_match_rank = static_cast<int>(rank) + 1;
                break;
            }
        }
        for (std::size_t ni = 0; ni < ns.size(); ++ni)
            if (first_match_rank > 0 && first_match_rank <= ns[ni]) ++hits[ni];
    }
    for (std::size_t ni = 0; ni < ns.size(); ++ni)
        report.recalls_pct[ni] =
            report.evaluated > 0
                ? 100.0 * hits[ni] / static_cast<double>(report.evaluated)
                : 0.0;
    return report;
}

}  // namespace vpr
