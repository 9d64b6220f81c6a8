#include "gosr/backbones.hpp"

#include "gosr/common.hpp"

namespace gosr {

namespace {

std::unique_ptr<Network> build_mlp(const BackboneSpec& spec) {
  auto net = std::make_unique<Network>();
  net->add(std::make_unique<Flatten>("flatten"));
  int in_features = spec.channels * spec.height * spec.width;
  int index = 1;
  for (int width : spec.mlp.hidden) {
    if (width <= 0) throw ConfigError("mlp: hidden width must be positive");
    net->add(std::make_unique<Dense>("fc" + std::to_string(index), in_features, width, spec.mlp.with_bias));
    net->add(std::make_unique<ReLU>("relu" + std::to_string(index)));
    in_features = width;
    ++index;
  }
  net->add(std::make_unique<Dense>("fc" + std::to_string(index), in_features, spec.num_classes, spec.mlp.with_bias));
  return net;
}

std::unique_ptr<Network> build_small_cnn(const BackboneSpec& spec) {
  const auto& cfg = spec.small_cnn;
  if (cfg.conv1_channels <= 0 || cfg.conv2_channels <= 0 || cfg.fc_width <= 0)
    throw ConfigError("small_cnn: channel/width settings must be positive");
  auto net = std::make_unique<Network>();
  net->add(std::make_unique<Conv2d>("conv1", spec.channels, cfg.conv1_channels, 3, 1, 1, true));
  net->add(std::make_unique<ReLU>("relu1"));
  net->add(std::make_unique<MaxPool2d>("pool1", 2, 2));
  net->add(std::make_unique<Conv2d>("conv2", cfg.conv1_channels, cfg.conv2_channels, 3, 1, 1, true));
  net->add(std::make_unique<ReLU>("relu2"));
  net->add(std::make_unique<MaxPool2d>("pool2", 2, 2));
  net->add(std::make_unique<Flatten>("flatten"));
  const int spatial_h = spec.height / 4, spatial_w = spec.width / 4;
  if (spatial_h <= 0 || spatial_w <= 0) throw ConfigError("small_cnn: input too small for two 2x2 pools");
  net->add(std::make_unique<Dense>("fc1", cfg.conv2_channels * spatial_h * spatial_w, cfg.fc_width, true));
  net->add(std::make_unique<ReLU>("relu3"));
  net->add(std::make_unique<Dense>("fc2", cfg.fc_width, spec.num_classes, true));
  return net;
}

// 32x32-style stem (3x3 conv, no initial pooling), stages 64/128/256/512
// with two blocks each, global average pooling, linear head.
std::unique_ptr<Network> build_resnet18(const BackboneSpec& spec) {
  auto net = std::make_unique<Network>();
  net->add(std::make_unique<Conv2d>("conv1", spec.channels, 64, 3, 1, 1, false));
  net->add(std::make_unique<BatchNorm2d>("bn1", 64));
  net->add(std::make_unique<ReLU>("relu1"));
  const int widths[4] = {64, 128, 256, 512};
  int in_ch = 64;
  for (int stage = 0; stage < 4; ++stage) {
    const int out_ch = widths[stage];
    const int stride = stage == 0 ? 1 : 2;
    net->add(std::make_unique<BasicBlock>("layer" + std::to_string(stage + 1) + "a", in_ch, out_ch, stride));
    net->add(std::make_unique<BasicBlock>("layer" + std::to_string(stage + 1) + "b", out_ch, out_ch, 1));
    in_ch = out_ch;
  }
  net->add(std::make_unique<GlobalAvgPool>("avgpool"));
  net->add(std::make_unique<Dense>("fc", 512, spec.num_classes, true));
  return net;
}

}  // namespace

std::vector<std::string> registered_architectures() { return {"mlp", "small_cnn", "resnet18"}; }

std::unique_ptr<Network> build_backbone(const BackboneSpec& spec) {
  if (spec.num_classes < 2) throw ConfigError("backbone: num_classes must be at least 2");
  if (spec.channels <= 0 || spec.height <= 0 || spec.width <= 0)
    throw ConfigError("backbone: input shape must be positive");

  std::unique_ptr<Network> net;
  if (spec.architecture == "mlp") net = build_mlp(spec);
  else if (spec.architecture == "small_cnn") net = build_small_cnn(spec);
  else if (spec.architecture == "resnet18") net = build_resnet18(spec);
  else {
    std::string names;
    for (const auto& n : registered_architectures()) names += (names.empty() ? "" : ", ") + n;
    throw ConfigError("unregistered architecture \"" + spec.architecture + "\" (have: " + names + ")");
  }
  net->finalize(spec.input_shape());
  net->init_params(spec.init_seed);
  return net;
}

std::unique_ptr<Network> clone_network(const BackboneSpec& spec, const Network& source) {
  auto copy = build_backbone(spec);
  copy->deserialize(source.serialize());
  return copy;
}

}  // namespace gosr
