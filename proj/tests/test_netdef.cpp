#include <gtest/gtest.h>

#include <string>

#include "yolospp/errors.hpp"
#include "yolospp/netdef.hpp"
#include "yolospp/network.hpp"

namespace yolospp {
namespace {

const std::string kMinimal = "[net]\nwidth=64\nheight=64\nchannels=3\n[convolutional]\nfilters=4\nsize=3\nstride=1\npad=1";

const std::string kSppSnippet = R"([net]
width=32
height=32
channels=3

[convolutional]
filters=8
size=1
stride=1
pad=1
activation=leaky

[maxpool]
stride=1
size=5

[route]
layers=-2

[maxpool]
stride=1
size=9

[route]
layers=-4

[maxpool]
stride=1
size=13

[route]
layers=-1,-3,-5,-6
)";

std::vector<LayerShape> head_grids(const ModelGraph& g, int side) {
  const auto shapes = resolve_shapes(g, side, side);
  std::vector<LayerShape> out;
  for (int i : g.yolo_layers()) out.push_back(shapes[static_cast<std::size_t>(i)]);
  return out;
}

TEST(ParseCfg, MinimalFile) {
  const ModelGraph g = parse_cfg(kMinimal);
  ASSERT_EQ(g.size(), 1);
  EXPECT_EQ(g.layer(0).kind, LayerKind::convolutional);
  EXPECT_EQ(g.shapes()[0], (LayerShape{4, 64, 64}));
}

TEST(ParseCfg, SppSnippetConcatenatesFourBranches) {
  const ModelGraph g = parse_cfg(kSppSnippet);
  ASSERT_EQ(g.size(), 7);
  EXPECT_EQ(g.sources(6), (std::vector<int>{5, 3, 1, 0}));
  EXPECT_EQ(g.shapes()[6], (LayerShape{32, 32, 32}));
  for (int i : {0, 1, 3, 5}) EXPECT_EQ(g.shapes()[static_cast<std::size_t>(i)], (LayerShape{8, 32, 32}));
}

TEST(ParseCfg, UnknownSectionNamesSectionAndLine) {
  try {
    parse_cfg("[net]\nwidth=32\nheight=32\n\n[conv]\nfilters=1\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 5);
    EXPECT_NE(std::string(e.what()).find("conv"), std::string::npos);
  }
}

TEST(ParseCfg, Rejections) {
  EXPECT_THROW(parse_cfg("[convolutional]\nfilters=1\n"), ParseError);
  EXPECT_THROW(parse_cfg("[net]\nwidth 32\n"), ParseError);
  EXPECT_THROW(parse_cfg("[net]\nwidth=32\nheight=32\n[route]\nlayers=-1\n"), ParseError);
  EXPECT_THROW(parse_cfg("[net]\nwidth=32\nheight=32\n[convolutional]\nfilters=2\nsize=1\n[route]\nlayers=1\n"),
               ParseError);
  try {
    parse_cfg("[net]\nwidth=32\nheight=32\n[convolutional]\nfilters=2\nsize=1\n[route]\nlayers=-3\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 7);
  }
}

TEST(ParseCfg, CommentsAndBlankLinesIgnored) {
  const ModelGraph a = parse_cfg(kMinimal);
  const ModelGraph b = parse_cfg("# header\n[net]\n; note\nwidth=64\n\nheight=64\nchannels=3\n"
                                 "[convolutional]\nfilters=4 # four\nsize=3\nstride=1\npad=1\n");
  EXPECT_EQ(a, b);
}

TEST(ParseCfg, ShortcutShapeMismatchIsValidationError) {
  EXPECT_THROW(parse_cfg("[net]\nwidth=32\nheight=32\n[convolutional]\nfilters=4\nsize=1\n"
                         "[convolutional]\nfilters=8\nsize=1\n[shortcut]\nfrom=-2\n"),
               ValidationError);
}

TEST(ShapeCheck, DarknetDepthAtTwoFiftySix) {
  const ModelGraph g = builtin_graph(Variant::yolov3, 80, 256);
  const auto shapes = shape_check(g, 256, 256);
  EXPECT_EQ(shapes[kDarknet53LastLayer].height, 8);
  EXPECT_EQ(shapes[kDarknet53LastLayer].width, 8);
  EXPECT_EQ(shapes[kDarknet53LastLayer].channels, 1024);
}

TEST(ShapeCheck, HeadGrids) {
  for (Variant v : {Variant::yolov3, Variant::yolov3_spp}) {
    const ModelGraph g = builtin_graph(v, 10);
    const auto at640 = head_grids(g, 640);
    ASSERT_EQ(at640.size(), 3u);
    EXPECT_EQ(at640[0], (LayerShape{45, 20, 20}));
    EXPECT_EQ(at640[1], (LayerShape{45, 40, 40}));
    EXPECT_EQ(at640[2], (LayerShape{45, 80, 80}));
    const auto at256 = head_grids(g, 256);
    EXPECT_EQ(at256[0].width, 8);
    EXPECT_EQ(at256[1].width, 16);
    EXPECT_EQ(at256[2].width, 32);
  }
  const auto tiny = head_grids(builtin_graph(Variant::yolov3_tiny, 10), 640);
  ASSERT_EQ(tiny.size(), 2u);
  EXPECT_EQ(tiny[0].width, 20);
  EXPECT_EQ(tiny[1].width, 40);
}

TEST(ShapeCheck, RejectsIndivisibleSize) {
  EXPECT_THROW(shape_check(builtin_graph(Variant::yolov3, 80), 100, 100), ValidationError);
  EXPECT_THROW(shape_check(builtin_graph(Variant::yolov3_tiny, 80), 640, 100), ValidationError);
}

TEST(BuiltinGraph, HeadChannels) {
  const ModelGraph g80 = builtin_graph(Variant::yolov3, 80);
  const ModelGraph g10 = builtin_graph(Variant::yolov3_spp, 10);
  for (int i : g80.yolo_layers()) EXPECT_EQ(g80.shapes()[static_cast<std::size_t>(i)].channels, 255);
  for (int i : g10.yolo_layers()) EXPECT_EQ(g10.shapes()[static_cast<std::size_t>(i)].channels, 45);
  EXPECT_EQ(g10.num_classes(), 10);
  EXPECT_THROW(builtin_graph(Variant::yolov3, 0), ValidationError);
}

TEST(BuiltinGraph, BackboneHasFiftyTwoConvolutions) {
  for (Variant v : {Variant::yolov3, Variant::yolov3_spp}) {
    const ModelGraph g = builtin_graph(v, 10);
    int convs = 0;
    for (int i = 0; i <= kDarknet53LastLayer; ++i) convs += g.layer(i).kind == LayerKind::convolutional;
    EXPECT_EQ(convs, kDarknet53Convolutions);
    EXPECT_EQ(g.layer(kDarknet53LastLayer).kind, LayerKind::shortcut);
  }
}

TEST(BuiltinGraph, TinyLayout) {
  const ModelGraph g = builtin_graph(Variant::yolov3_tiny, 10);
  int convs = 0, pools = 0;
  for (const LayerSpec& l : g.layers()) {
    convs += l.kind == LayerKind::convolutional;
    pools += l.kind == LayerKind::maxpool;
  }
  EXPECT_EQ(convs, 13);
  EXPECT_EQ(pools, 6);
}

TEST(BuiltinGraph, SppDiffIsExactlyTheBlock) {
  const ModelGraph base = builtin_graph(Variant::yolov3, 10);
  const ModelGraph spp = builtin_graph(Variant::yolov3_spp, 10);
  const auto block = inserted_block(base, spp);
  ASSERT_TRUE(block.has_value());
  EXPECT_EQ(spp.size() - base.size(), block->second - block->first);
  EXPECT_GT(block->first, kDarknet53LastLayer);
  int pools = 0, routes = 0, convs = 0;
  for (int i = block->first; i < block->second; ++i) {
    pools += spp.layer(i).kind == LayerKind::maxpool;
    routes += spp.layer(i).kind == LayerKind::route;
    convs += spp.layer(i).kind == LayerKind::convolutional;
  }
  EXPECT_EQ(pools, 3);
  EXPECT_EQ(routes, 3);
  EXPECT_EQ(convs, 1);
  EXPECT_FALSE(inserted_block(base, builtin_graph(Variant::yolov3_tiny, 10)).has_value());
}

TEST(BuiltinGraph, RenderParseRoundTrip) {
  for (Variant v : {Variant::yolov3, Variant::yolov3_spp, Variant::yolov3_tiny})
    for (int classes : {1, 10, 80}) {
      const ModelGraph g = builtin_graph(v, classes, 416);
      const std::string text = render_cfg(g);
      const ModelGraph back = parse_cfg(text);
      EXPECT_EQ(back, g) << to_string(v);
      EXPECT_EQ(render_cfg(back), text);
    }
}

TEST(BuiltinGraph, MatchesShippedGoldenFiles) {
  const std::string dir = YOLOSPP_CFG_DIR;
  EXPECT_EQ(load_cfg_file(dir + "/yolov3.cfg"), builtin_graph(Variant::yolov3, 80, 640));
  EXPECT_EQ(load_cfg_file(dir + "/yolov3-spp.cfg"), builtin_graph(Variant::yolov3_spp, 80, 640));
  EXPECT_EQ(load_cfg_file(dir + "/yolov3-tiny.cfg"), builtin_graph(Variant::yolov3_tiny, 80, 640));
}

TEST(BuiltinGraph, VariantNames) {
  EXPECT_EQ(parse_variant("yolov3_spp"), Variant::yolov3_spp);
  EXPECT_EQ(parse_variant("yolov3-tiny"), Variant::yolov3_tiny);
  EXPECT_FALSE(parse_variant("yolov4").has_value());
}

TEST(BuiltinGraph, AnchorSets) {
  ASSERT_EQ(coco_anchors().size(), 9u);
  EXPECT_EQ(coco_anchors()[6], (Anchor{116, 90}));
  EXPECT_EQ(tiny_anchors().size(), 6u);
}

TEST(ParseCfg, RoundTripOfParsedText) {
  const ModelGraph g = parse_cfg(kSppSnippet);
  EXPECT_EQ(parse_cfg(render_cfg(g)), g);
}

}  // namespace
}  // namespace yolospp
