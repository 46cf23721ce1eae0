#ifndef V2VSSC_PERSISTENCE_H_
#define V2VSSC_PERSISTENCE_H_

#include <cstdint>
#include <string>
#include <vector>

#include "v2vssc/binary_io.h"
#include "v2vssc/voxel_grid.h"
#include "v2vssc/world_sim.h"

namespace v2vssc {

// VSSC semantic grid file: header with dims, voxel size, origin and a label
// name table, then (label u8, run u32) pairs in x-fastest order.
std::vector<std::uint8_t> EncodeGrid(const SemanticGrid& g);
SemanticGrid DecodeGrid(const std::vector<std::uint8_t>& bytes);
void SaveGrid(const SemanticGrid& g, const std::string& path);
SemanticGrid LoadGrid(const std::string& path);

std::string SceneToJson(const Scene& s);
Scene SceneFromJson(const std::string& text);  // throws ParseError
void SaveScene(const Scene& s, const std::string& path);
Scene LoadScene(const std::string& path);

}  // namespace v2vssc

#endif  // V2VSSC_PERSISTENCE_H_
