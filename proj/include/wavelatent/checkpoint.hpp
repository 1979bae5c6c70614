#pragma once

#include <filesystem>

#include "wavelatent/container.hpp"
#include "wavelatent/model.hpp"

namespace wavelatent {

inline constexpr std::string_view kCheckpointMagic = "XDWT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Header fields, in order: in_channels, base_channels, num_downsamples,
/// latent_channels, input_size, frequency_branch_weights, activation.
/// The container tag carries the architecture.
Container to_container(const VaeModel& model);
VaeModel from_container(const Container& c);

void save_checkpoint(const std::filesystem::path& path, const VaeModel& model);
VaeModel load_checkpoint(const std::filesystem::path& path);

}  // namespace wavelatent
