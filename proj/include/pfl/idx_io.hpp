#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pfl/loss_model.hpp"

namespace pfl {

// IDX image/label files (the MNIST container format): big-endian magic
// 0x00000803 for images, 0x00000801 for labels, dims as unsigned 32-bit
// big-endian. Pixels come back scaled to [0, 1].

struct IdxImages {
    int rows = 0;
    int cols = 0;
    std::vector<std::vector<double>> images;  // each rows*cols, in [0,1]
};

IdxImages read_idx_images(const std::string& path);
std::vector<int> read_idx_labels(const std::string& path);

void write_idx_images(const std::string& path, int rows, int cols,
                      const std::vector<std::vector<double>>& images);
void write_idx_labels(const std::string& path, const std::vector<int>& labels);

// pair images with labels; sample key is the dataset index
std::vector<Sample> load_idx_dataset(const std::string& images_path,
                                     const std::string& labels_path);

}  // namespace pfl
