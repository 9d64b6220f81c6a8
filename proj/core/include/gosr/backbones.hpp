#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gosr/network.hpp"

namespace gosr {

/// Backbone description. `architecture` must be one of the registered
/// names; the *_cfg blocks apply to the matching architecture and keep
/// their defaults otherwise.
struct BackboneSpec {
  std::string architecture = "small_cnn";  // small_cnn | mlp | resnet18
  int channels = 3, height = 32, width = 32;
  int num_classes = 10;
  std::uint64_t init_seed = 0;

  struct MlpConfig {
    std::vector<int> hidden = {64};
    bool with_bias = true;
  } mlp;

  struct SmallCnnConfig {
    int conv1_channels = 8;
    int conv2_channels = 16;
    int fc_width = 64;
  } small_cnn;

  std::vector<int> input_shape() const { return {channels, height, width}; }
};

std::vector<std::string> registered_architectures();

/// Builds, finalizes, and seeds a network for the spec. Throws ConfigError
/// for unregistered architecture names or invalid dimensions.
std::unique_ptr<Network> build_backbone(const BackboneSpec& spec);

/// Fresh network with identical topology and a copy of all parameters and
/// buffers.
std::unique_ptr<Network> clone_network(const BackboneSpec& spec, const Network& source);

}  // namespace gosr
