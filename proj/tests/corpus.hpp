#pragma once

// Loads the checked-in test images.

#include <filesystem>
#include <vector>

#include "epq/image.hpp"
#include "epq/predict.hpp"

namespace corpus {

inline std::vector<epq::Image> gray_images() {
  std::vector<epq::Image> out;
  for (const auto& p : epq::list_images("data/corpus")) out.push_back(epq::read_pnm_file(p));
  return out;
}

inline std::vector<epq::Image> color_images() {
  std::vector<epq::Image> out;
  for (const auto& p : epq::list_images("data/color")) out.push_back(epq::read_pnm_file(p));
  return out;
}

inline std::vector<epq::DctPlane> gray_planes() {
  std::vector<epq::DctPlane> out;
  for (const auto& img : gray_images()) out.push_back(epq::make_dct_plane(epq::partition_and_pad(epq::channel_plane(img, 0))));
  return out;
}

}  // namespace corpus
