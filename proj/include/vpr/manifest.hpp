#pragma once

#include <string>
#include <vector>

#include "vpr/retrieval.hpp"

namespace vpr {

// JSON-lines manifest, one record per image:
//   {"id":0,"tensor":"images/img_000000.dtns","easting":...,"northing":...,
//    "heading":...,"frame_index":...,"place_id":...,"split":"database"}
// heading and frame_index may be null.

void write_manifest(const std::string& path,
                    const std::vector<PlaceRecord>& records);
std::vector<PlaceRecord> read_manifest(const std::string& path);

}  // namespace vpr
