#include "vpr/manifest.hpp"

#include <fstream>

#include <json.hpp>

namespace vpr {

using ordered_json = nlohmann::ordered_json;

void write_manifest(const std::string& path,
                    const std::vector<PlaceRecord>& records) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw data_error(path + ": cannot open for writing");
    for (const auto& r : records) {
        ordered_json j;
        j["id"] = r.id;
        j["tensor"] = r.tensor_path;
        j["easting"] = r.easting;
        j["northing"] = r.northing;
        if (r.heading)
            j["heading"] = *r.heading;
        else
            j["heading"] = nullptr;
        if (r.frame)
            j["frame_index"] = *r.frame;
        else
            j["frame_index"] = nullptr;
        j["place_id"] = r.place_id;
        j["split"] = r.split;
        f << j.dump() << "\n";
    }
    if (!f) throw data_error(path + ": write failed");
}

std::vector<PlaceRecord> read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw data_error(path + ": cannot open");
    std::vector<PlaceRecord> out;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const std::exception& e) {
            throw data_error(path + ":" + std::to_string(line_no) +
                             ": malformed JSON: " + e.what());
        }
        PlaceRecord r;
        try {
            r.id = j.at("id").get<std::int64_t>();
            r.tensor_path = j.at("tensor").get<std::string>();
            r.easting = j.at("easting").get<double>();
            r.northing = j.at("northing").get<double>();
            if (!j.at("heading").is_null())
                r.heading = j.at("heading").get<double>();
            if (!j.at("frame_index").is_null())
                r.frame = j.at("frame_index").get<std::int64_t>();
            r.place_id = j.at("place_id").get<std::int64_t>();
            r.split = j.at("split").get<std::string>();
        } catch (const std::exception& e) {
            throw data_error(path + ":" + std::to_string(line_no) +
                             ": missing or mistyped field: " + e.what());
        }
        r.validate();
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace vpr
