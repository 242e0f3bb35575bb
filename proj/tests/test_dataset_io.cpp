#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <set>

#include "oracles.hpp"
#include "ram/annotation.hpp"
#include "ram/augment.hpp"
#include "ram/manifest.hpp"

using namespace ram;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = RAM_FIXTURE_DIR;

std::string doc(const std::string& robndbox, int width = 416, int height = 416) {
  return "<annotation><folder>SSS</folder><filename>img.png</filename><size><width>" + std::to_string(width) +
         "</width><height>" + std::to_string(height) +
         "</height><depth>3</depth></size><object><type>robndbox</type><name>cup</name><robndbox>" + robndbox +
         "</robndbox></object></annotation>";
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;  // unreachable in these tests
}

std::vector<fs::path> valid_fixtures() {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(kFixtures / "valid")) {
    if (e.path().extension() == ".xml") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

DatasetManifest numbered_manifest(std::size_t n) {
  DatasetManifest m;
  for (std::size_t i = 0; i < n; ++i) m.entries.push_back({"e" + std::to_string(i), "e" + std::to_string(i) + ".xml", {}, SubsetTag::SSS});
  return m;
}

}  // namespace

TEST(ParseAnnotation, QuarterPiIsFortyFiveDegrees) {
  const auto img = parse_annotation(doc("<cx>100</cx><cy>200</cy><w>80</w><h>30</h><angle>0.7853982</angle>"));
  ASSERT_EQ(img.boxes.size(), 1u);
  const GraspBox& b = img.boxes[0];
  EXPECT_EQ(b.x, 100.0);
  EXPECT_EQ(b.y, 200.0);
  EXPECT_EQ(b.w, 80.0);
  EXPECT_EQ(b.h, 30.0);
  EXPECT_NEAR(b.theta, 45.0, 1e-5);
  EXPECT_EQ(img.image_id, "img");
  EXPECT_EQ(img.subset, SubsetTag::SSS);
  EXPECT_EQ(img.width, 416);
}

TEST(ParseAnnotation, ZeroAndPiAngles) {
  EXPECT_EQ(parse_annotation(doc("<cx>1</cx><cy>1</cy><w>8</w><h>3</h><angle>0</angle>")).boxes[0].theta, 0.0);
  const double pi_deg =
      parse_annotation(doc("<cx>1</cx><cy>1</cy><w>8</w><h>3</h><angle>3.141592653589793</angle>")).boxes[0].theta;
  EXPECT_EQ(pi_deg, 0.0);
}

TEST(ParseAnnotation, Errors) {
  EXPECT_EQ(code_of([] { parse_annotation(doc("<cy>1</cy><w>8</w><h>3</h><angle>0</angle>")); }),
            ErrorCode::MissingField);
  EXPECT_EQ(code_of([] { parse_annotation(doc("<cx>1</cx><cy>1</cy><w>8</w><h>3</h><angle>4.0</angle>")); }),
            ErrorCode::AngleOutOfRange);
  EXPECT_EQ(code_of([] { parse_annotation(doc("<cx>1</cx><cy>1</cy><w>8</w><h>3</h><angle>-0.1</angle>")); }),
            ErrorCode::AngleOutOfRange);
  EXPECT_EQ(code_of([] { parse_annotation("<annotation><size>"); }), ErrorCode::MalformedXml);
  EXPECT_EQ(code_of([] { parse_annotation(doc("<cx>abc</cx><cy>1</cy><w>8</w><h>3</h><angle>0</angle>")); }),
            ErrorCode::MalformedXml);
}

TEST(ParseAnnotation, SlackIsSnappedWithWarning) {
  std::vector<std::string> warnings;
  const auto img = parse_annotation(doc("<cx>1</cx><cy>1</cy><w>8</w><h>3</h><angle>-5e-7</angle>"), {}, &warnings);
  EXPECT_EQ(img.boxes[0].theta, 0.0);
  ASSERT_EQ(warnings.size(), 1u);
}

TEST(ParseAnnotation, ClockwiseConvention) {
  const ParseOptions cw{XmlAngleConvention::Clockwise};
  const auto img = parse_annotation(doc("<cx>1</cx><cy>1</cy><w>8</w><h>3</h><angle>0.5235987755982988</angle>"), cw);
  EXPECT_NEAR(img.boxes[0].theta, 150.0, 1e-9);
  const std::string back = write_annotation(img, cw);
  EXPECT_NEAR(parse_annotation(back, cw).boxes[0].theta, 150.0, 1e-9);
}

TEST(ParseAnnotation, AxisAlignedBndbox) {
  const std::string xml =
      "<annotation><size><width>100</width><height>100</height></size><object><name>a</name><bndbox><xmin>10</xmin>"
      "<ymin>20</ymin><xmax>50</xmax><ymax>30</ymax></bndbox></object></annotation>";
  const auto img = parse_annotation(xml);
  ASSERT_EQ(img.boxes.size(), 1u);
  EXPECT_EQ(img.boxes[0].x, 30.0);
  EXPECT_EQ(img.boxes[0].y, 25.0);
  EXPECT_EQ(img.boxes[0].w, 40.0);
  EXPECT_EQ(img.boxes[0].h, 10.0);
  EXPECT_EQ(img.boxes[0].theta, 0.0);
}

TEST(ParseAnnotation, CenterOutsideIsAnIssueNotAParseError) {
  const auto img = parse_annotation(doc("<cx>700</cx><cy>1</cy><w>8</w><h>3</h><angle>0</angle>", 640, 480));
  EXPECT_EQ(annotation_issues(img).size(), 1u);
}

TEST(AnnotationRoundTrip, FixtureCorpus) {
  const auto files = valid_fixtures();
  ASSERT_EQ(files.size(), 50u);
  for (const auto& f : files) {
    const auto a = parse_annotation(read_text_file(f));
    const std::string canonical = write_annotation(a);
    const auto b = parse_annotation(canonical);
    ASSERT_EQ(a.boxes.size(), b.boxes.size()) << f;
    EXPECT_EQ(a.image_id, b.image_id);
    EXPECT_EQ(a.subset, b.subset);
    EXPECT_EQ(a.width, b.width);
    EXPECT_EQ(a.height, b.height);
    EXPECT_EQ(a.object_names, b.object_names);
    for (std::size_t i = 0; i < a.boxes.size(); ++i) {
      EXPECT_EQ(a.boxes[i].x, b.boxes[i].x);
      EXPECT_EQ(a.boxes[i].y, b.boxes[i].y);
      EXPECT_EQ(a.boxes[i].w, b.boxes[i].w);
      EXPECT_EQ(a.boxes[i].h, b.boxes[i].h);
      const double da = std::remainder(deg_to_rad(a.boxes[i].theta) - deg_to_rad(b.boxes[i].theta), std::numbers::pi);
      EXPECT_LT(std::abs(da), 1e-9) << f;
    }
    EXPECT_EQ(write_annotation(b), canonical) << f;
    EXPECT_TRUE(annotation_issues(a).empty()) << f;
  }
}

TEST(AnnotationRoundTrip, RandomBoxes) {
  std::mt19937_64 rng(17);
  AnnotatedImage img{"rand", 640, 480, SubsetTag::NSS, {}, {}};
  for (int i = 0; i < 500; ++i) img.boxes.push_back(oracle::random_box(rng, 480));
  const auto back = parse_annotation(write_annotation(img));
  for (std::size_t i = 0; i < img.boxes.size(); ++i) {
    EXPECT_EQ(back.boxes[i].x, img.boxes[i].x);
    EXPECT_EQ(back.boxes[i].w, img.boxes[i].w);
    EXPECT_LT(angular_distance(back.boxes[i].theta, img.boxes[i].theta), 1e-9);
  }
}

TEST(Manifest, LoadsFixtureManifest) {
  const auto m = load_manifest(kFixtures / "manifest.json");
  EXPECT_EQ(m.entries.size(), 50u);
  EXPECT_EQ(m.split_seed, 42u);
  std::set<std::string> ids;
  for (const auto& e : m.entries) {
    ids.insert(e.id);
    EXPECT_TRUE(fs::exists(e.annotation)) << e.annotation;
  }
  EXPECT_EQ(ids.size(), 50u);
}

TEST(Manifest, RejectsDuplicates) {
  const nlohmann::json dup_path{{"entries", {{{"annotation", "a.xml"}, {"id", "x"}}, {{"annotation", "a.xml"}, {"id", "y"}}}}};
  EXPECT_THROW(manifest_from_json(dup_path, "."), Error);
  const nlohmann::json dup_id{{"entries", {{{"annotation", "a.xml"}, {"id", "x"}}, {{"annotation", "b.xml"}, {"id", "x"}}}}};
  EXPECT_THROW(manifest_from_json(dup_id, "."), Error);
  EXPECT_THROW(manifest_from_json(nlohmann::json{{"nope", 1}}, "."), Error);
}

TEST(Manifest, JsonRoundTrip) {
  DatasetManifest m = numbered_manifest(5);
  m.train_count = 3;
  for (auto& e : m.entries) e.annotation = fs::path("/base") / e.annotation;
  const auto back = manifest_from_json(manifest_to_json(m, "/base"), "/base");
  ASSERT_EQ(back.entries.size(), 5u);
  EXPECT_EQ(back.entries[2].annotation, m.entries[2].annotation);
  EXPECT_EQ(back.train_count, 3u);
}

TEST(Split, DeterministicAndDisjoint) {
  const auto m = numbered_manifest(13500);
  const auto [train, test] = split(m, 13000, 500, 42);
  EXPECT_EQ(train.size(), 13000u);
  EXPECT_EQ(test.size(), 500u);
  std::set<std::string> seen;
  for (const auto& e : train) seen.insert(e.id);
  for (const auto& e : test) EXPECT_TRUE(seen.insert(e.id).second);
  EXPECT_EQ(seen.size(), 13500u);

  const auto again = split(m, 13000, 500, 42);
  for (std::size_t i = 0; i < test.size(); ++i) EXPECT_EQ(again.second[i].id, test[i].id);
  const auto other = split(m, 13000, 500, 43);
  std::size_t same = 0;
  for (std::size_t i = 0; i < test.size(); ++i) same += other.second[i].id == test[i].id;
  EXPECT_LT(same, 20u);
}

TEST(Split, ShuffleMatchesIndependentFisherYates) {
  const auto m = numbered_manifest(40);
  std::vector<std::size_t> idx(40);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  SplitMix64 rng(99);
  for (std::size_t i = idx.size() - 1; i > 0; --i) std::swap(idx[i], idx[rng.next() % (i + 1)]);
  const auto [train, test] = split(m, 30, 10, 99);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(train[i].id, "e" + std::to_string(idx[i]));
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(test[i].id, "e" + std::to_string(idx[30 + i]));
}

TEST(Split, InsufficientEntries) {
  EXPECT_EQ(code_of([] { split(numbered_manifest(10), 8, 3, 1); }), ErrorCode::InsufficientEntries);
}

TEST(AnchorDims, Examples) {
  std::vector<AnnotatedImage> imgs(2);
  imgs[0].boxes = {GraspBox(0, 0, 40, 10, 0), GraspBox(0, 0, 60, 20, 0)};
  imgs[1].boxes = {GraspBox(0, 0, 50, 30, 45)};
  const auto d = anchor_dims_from(imgs);
  EXPECT_DOUBLE_EQ(d.w, 50.0);
  EXPECT_DOUBLE_EQ(d.h, 20.0);
  std::vector<AnnotatedImage> empty(3);
  EXPECT_EQ(code_of([&] { anchor_dims_from(empty); }), ErrorCode::EmptyTrainingSet);
}

TEST(AnchorDims, MatchesStreamingMeanAndIgnoresOrder) {
  std::mt19937_64 rng(23);
  std::vector<AnnotatedImage> imgs(100);
  double mw = 0, mh = 0;
  std::size_t n = 0;
  for (auto& img : imgs) {
    for (int k = 0; k < 10; ++k) {
      const GraspBox b = oracle::random_box(rng, 400);
      img.boxes.push_back(b);
      ++n;
      mw += (b.w - mw) / static_cast<double>(n);  // Welford-style running mean
      mh += (b.h - mh) / static_cast<double>(n);
    }
  }
  const auto d = anchor_dims_from(imgs);
  EXPECT_NEAR(d.w, mw, 1e-9 * mw);
  EXPECT_NEAR(d.h, mh, 1e-9 * mh);
  std::shuffle(imgs.begin(), imgs.end(), rng);
  const auto e = anchor_dims_from(imgs);
  EXPECT_NEAR(e.w, d.w, 1e-12 * d.w);
  EXPECT_NEAR(e.h, d.h, 1e-12 * d.h);
}

TEST(AnchorDims, FixtureManifest) {
  const auto d = anchor_dims_from(load_manifest(kFixtures / "manifest.json"));
  EXPECT_NEAR(d.w, 85.2230, 1e-4);
  EXPECT_NEAR(d.h, 25.5851, 1e-4);
}

TEST(Augment, FlipAndRotateExamples) {
  const GraspBox b(100, 200, 80, 30, 45);
  const GraspBox f = transform_box(b, AugmentOp::FlipH, 416, 416);
  EXPECT_DOUBLE_EQ(f.x, 316.0);
  EXPECT_DOUBLE_EQ(f.y, 200.0);
  EXPECT_DOUBLE_EQ(f.theta, 135.0);
  const GraspBox v = transform_box(b, AugmentOp::FlipV, 416, 416);
  EXPECT_DOUBLE_EQ(v.y, 216.0);
  EXPECT_DOUBLE_EQ(v.theta, 135.0);
  const GraspBox r = transform_box(b, AugmentOp::Rot180, 416, 416);
  EXPECT_DOUBLE_EQ(r.x, 316.0);
  EXPECT_DOUBLE_EQ(r.y, 216.0);
  EXPECT_DOUBLE_EQ(r.theta, 45.0);
  const GraspBox q = transform_box(b, AugmentOp::Rot90Cw, 640, 480);
  EXPECT_DOUBLE_EQ(q.x, 280.0);
  EXPECT_DOUBLE_EQ(q.y, 100.0);
  EXPECT_DOUBLE_EQ(q.theta, 135.0);
  EXPECT_EQ(q.w, 80.0);
}

TEST(Augment, FourQuarterTurnsAreIdentity) {
  std::mt19937_64 rng(31);
  AnnotatedImage img{"x", 640, 480, SubsetTag::SSS, {}, {}};
  for (int i = 0; i < 200; ++i) {
    const GraspBox b = oracle::random_box(rng, 400);
    img.boxes.emplace_back(std::fmod(b.x, 639.0), std::fmod(b.y, 479.0), b.w, b.h, b.theta);
  }
  AnnotatedImage t = img;
  for (int k = 0; k < 4; ++k) t = transform_labels(t, AugmentOp::Rot90Cw);
  EXPECT_EQ(t.width, 640);
  EXPECT_EQ(t.height, 480);
  for (std::size_t i = 0; i < img.boxes.size(); ++i) {
    EXPECT_NEAR(t.boxes[i].x, img.boxes[i].x, 1e-9);
    EXPECT_NEAR(t.boxes[i].y, img.boxes[i].y, 1e-9);
    EXPECT_LT(angular_distance(t.boxes[i].theta, img.boxes[i].theta), 1e-9);
  }
  AnnotatedImage h = transform_labels(transform_labels(img, AugmentOp::FlipH), AugmentOp::FlipH);
  for (std::size_t i = 0; i < img.boxes.size(); ++i) EXPECT_LT(angular_distance(h.boxes[i].theta, img.boxes[i].theta), 1e-9);
}

TEST(Augment, RasterMaskAgreement) {
  // The transformed box must cover exactly the pixels the original covers after
  // pushing them through the inverse image map.
  const double W = 640, H = 480;
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  struct Case {
    AugmentOp op;
    std::function<Point(Point)> inverse;  // transformed image -> original image
    double out_w, out_h;
  };
  const std::vector<Case> cases{
      {AugmentOp::FlipH, [&](Point p) { return Point{W - p.x, p.y}; }, W, H},
      {AugmentOp::FlipV, [&](Point p) { return Point{p.x, H - p.y}; }, W, H},
      {AugmentOp::Rot180, [&](Point p) { return Point{W - p.x, H - p.y}; }, W, H},
      {AugmentOp::Rot90Cw, [&](Point p) { return Point{p.y, H - p.x}; }, H, W},
      {AugmentOp::Rot270Cw, [&](Point p) { return Point{W - p.y, p.x}; }, H, W},
  };
  for (const auto& c : cases) {
    for (int i = 0; i < 20; ++i) {
      const GraspBox b(100 + 440 * u(rng), 100 + 280 * u(rng), 20 + 100 * u(rng), 10 + 40 * u(rng), 180 * u(rng));
      const GraspBox t = transform_box(b, c.op, W, H);
      EXPECT_GE(t.x, 0.0);
      EXPECT_LT(t.x, c.out_w);
      EXPECT_GE(t.y, 0.0);
      EXPECT_LT(t.y, c.out_h);
      const double r = std::hypot(b.w, b.h) / 2 + 1;
      const double iou = oracle::mask_iou([&](Point p) { return oracle::contains(t, p); },
                                          [&](Point p) { return oracle::contains(b, c.inverse(p)); }, t.x - r, t.y - r,
                                          t.x + r, t.y + r, 300);
      EXPECT_GT(iou, 0.99) << to_string(c.op) << " box " << i;
    }
  }
}

TEST(Augment, ParseOp) {
  EXPECT_EQ(parse_augment_op("flip_h"), AugmentOp::FlipH);
  EXPECT_EQ(parse_augment_op("rot270cw"), AugmentOp::Rot270Cw);
  EXPECT_THROW(parse_augment_op("rot45"), Error);
}
