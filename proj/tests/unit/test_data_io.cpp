#include <map>
#include <random>
#include <sstream>

#include "artdet/dataset.hpp"
#include "artdet/image.hpp"
#include "artdet/report.hpp"
#include "artdet/synth.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace artdet;

namespace {

DatasetManifest parse(const std::string& text) {
  std::istringstream in(text);
  return parse_manifest(in, "mem");
}

const char* kOneBox =
    R"({"path":"a.png","width":20,"height":10,"boxes":[{"x1":1.5,"y1":2,"x2":7.25,"y2":9,"difficult":false,"style":"filled"}]})";

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const DataError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("empty manifest") {
  const auto m = parse("");
  CHECK(m.entries.empty());
  CHECK(m.styles.empty());
}

TEST_CASE("manifest round trips byte for byte") {
  fixture::TempDir dir("manifest");
  const auto m = parse(kOneBox);
  REQUIRE(m.entries.size() == 1);
  CHECK(m.entries[0].boxes[0].box == BBox{1.5, 2, 7.25, 9});
  CHECK(m.styles == std::vector<std::string>{"filled"});
  save_manifest(m, dir / "m.jsonl");
  const std::string first = fixture::slurp(dir / "m.jsonl");
  const auto back = load_manifest(dir / "m.jsonl");
  CHECK(back == m);
  save_manifest(back, dir / "m2.jsonl");
  CHECK(fixture::slurp(dir / "m2.jsonl") == first);
}

TEST_CASE("invariant violations name the image") {
  const std::string bad =
      R"({"path":"broken.png","width":20,"height":10,"boxes":[{"x1":5,"y1":2,"x2":5,"y2":9}]})";
  const std::string err = error_of(bad);
  CHECK(err.find("broken.png") != std::string::npos);
  CHECK(error_of(R"({"path":"out.png","width":20,"height":10,"boxes":[{"x1":5,"y1":2,"x2":25,"y2":9}]})")
            .find("out.png") != std::string::npos);
  CHECK_FALSE(error_of(std::string(kOneBox) + "\n" + kOneBox).empty());
  CHECK_FALSE(error_of(R"({"split":"holdout"})").empty());
  CHECK_FALSE(error_of(std::string(R"({"styles":["outline"]})") + "\n" + kOneBox).empty());
}

TEST_CASE("malformed lines report their line number") {
  const std::string text = std::string(kOneBox) + "\n\n{not json\n";
  const std::string err = error_of(text);
  CHECK(err.find("mem:3:") != std::string::npos);
  CHECK(error_of(R"({"path":"x.png","width":"wide","height":3})").find("mem:1:") != std::string::npos);
  CHECK(error_of(R"({"path":"x.png","width":1e30,"height":3})").find("mem:1:") != std::string::npos);
  CHECK(error_of("[1,2]").find("mem:1:") != std::string::npos);
}

TEST_CASE("corrupted manifests are rejected cleanly") {
  SynthConfig sc;
  sc.count = 4;
  DatasetManifest m;
  m.split = "test";
  m.styles = synth_style_names();
  for (const auto& s : generate_in_memory(sc, "test")) m.entries.push_back(s.entry);
  const std::string good = serialize_manifest(m);
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> op(0, 3);
  const std::string alphabet = "{}[]\",:0123456789-.e truefalsnul\\x\n";
  int rejected = 0;
  for (int t = 0; t < 500; ++t) {
    std::string text = good;
    const int edits = 1 + t % 4;
    for (int k = 0; k < edits; ++k) {
      std::uniform_int_distribution<std::size_t> at(0, text.size() - 1);
      std::uniform_int_distribution<std::size_t> ch(0, alphabet.size() - 1);
      switch (op(rng)) {
        case 0: text[at(rng)] = alphabet[ch(rng)]; break;
        case 1: text.erase(at(rng), 1); break;
        case 2: text.insert(at(rng), 1, alphabet[ch(rng)]); break;
        default: text = text.substr(0, at(rng)); break;
      }
      if (text.empty()) text = "x";
    }
    try {
      const auto parsed = parse(text);
      CHECK_NOTHROW(parsed.validate());
    } catch (const DataError&) {
      ++rejected;
    } catch (const std::exception& e) {
      FAIL_CHECK("unexpected exception: " << e.what());
    }
  }
  CHECK(rejected > 250);
}

TEST_CASE("synthetic generation") {
  SynthConfig sc;
  sc.count = 100;
  sc.seed = 31;
  SUBCASE("gt count lies in the people range") {
    const auto imgs = generate_in_memory(sc, "train");
    std::size_t gts = 0;
    for (const auto& s : imgs) {
      gts += s.entry.boxes.size();
      CHECK(s.entry.boxes.size() >= 1);
      CHECK(s.entry.boxes.size() <= 3);
    }
    CHECK(gts >= 100);
    CHECK(gts <= 300);
  }
  SUBCASE("no people gives pure negatives") {
    sc.count = 10;
    sc.min_people = 0;
    sc.max_people = 0;
    for (const auto& s : generate_in_memory(sc, "train")) CHECK(s.entry.boxes.empty());
  }
  SUBCASE("boxes are the rendered extents and lie inside the image") {
    // One filled figure and nothing else on top of the background: the
    // figure colour is the most common colour that never occurs outside the
    // box, and its pixel extent must be the box exactly.
    sc.count = 20;
    sc.min_people = 1;
    sc.max_people = 1;
    sc.occlusion_prob = 0.0;
    sc.max_distractors = 0;
    sc.styles = {"filled"};
    for (const auto& s : generate_in_memory(sc, "val")) {
      REQUIRE(s.entry.boxes.size() == 1);
      const Annotation& a = s.entry.boxes[0];
      CHECK(a.style == "filled");
      CHECK(a.box.x1 >= 0);
      CHECK(a.box.y1 >= 0);
      CHECK(a.box.x2 <= sc.width);
      CHECK(a.box.y2 <= sc.height);
      auto key = [](Rgb c) { return (c.r << 16) | (c.g << 8) | c.b; };
      std::map<int, std::pair<int, int>> counts;
      for (int y = 0; y < sc.height; ++y)
        for (int x = 0; x < sc.width; ++x) {
          const bool in = x >= a.box.x1 && x < a.box.x2 && y >= a.box.y1 && y < a.box.y2;
          auto& c = counts[key(s.image.at(x, y))];
          (in ? c.first : c.second)++;
        }
      int fig = -1, best = 0;
      for (const auto& [k, c] : counts)
        if (c.second == 0 && c.first > best) best = c.first, fig = k;
      REQUIRE(fig >= 0);
      BBox ext{1e9, 1e9, -1, -1};
      for (int y = 0; y < sc.height; ++y)
        for (int x = 0; x < sc.width; ++x)
          if (key(s.image.at(x, y)) == fig) {
            ext.x1 = std::min<double>(ext.x1, x);
            ext.y1 = std::min<double>(ext.y1, y);
            ext.x2 = std::max<double>(ext.x2, x + 1);
            ext.y2 = std::max<double>(ext.y2, y + 1);
          }
      CHECK(iou(ext, a.box) == 1.0);
    }
  }
  SUBCASE("config validation") {
    sc.occlusion_prob = 1.5;
    CHECK_THROWS_AS(sc.validate(), ConfigError);
    sc = {};
    sc.styles = {"cubist"};
    CHECK_THROWS_AS(sc.validate(), ConfigError);
    sc = {};
    sc.min_people = 3;
    sc.max_people = 1;
    CHECK_THROWS_AS(sc.validate(), ConfigError);
  }
}

TEST_CASE("synthetic output is bitwise reproducible") {
  fixture::TempDir a("synth_a"), b("synth_b");
  SynthConfig sc;
  sc.count = 6;
  sc.difficult_prob = 0.3;
  const auto ma = generate_synthetic(sc, "train", a.path(), 1);
  const auto mb = generate_synthetic(sc, "train", b.path(), 3);
  CHECK(ma == mb);
  CHECK(fixture::slurp(a / "train.jsonl") == fixture::slurp(b / "train.jsonl"));
  for (const auto& e : ma.entries) {
    CHECK(fixture::slurp(a.path() / e.path) == fixture::slurp(b.path() / e.path));
  }
  const auto reread = load_manifest(a / "train.jsonl");
  CHECK(reread == ma);
  const Image img = read_png(resolve_image(a / "train.jsonl", ma.entries[0]));
  CHECK(img == render_synthetic(sc, "train", 0).image);
}

TEST_CASE("png round trip and errors") {
  fixture::TempDir dir("png");
  Image img(7, 5, {1, 2, 3});
  img.set(3, 2, {200, 100, 50});
  write_png(img, dir / "x.png");
  CHECK(read_png(dir / "x.png") == img);
  fixture::spit(dir / "junk.png", "not a png");
  CHECK_THROWS_AS(read_png(dir / "junk.png"), DataError);
  CHECK_THROWS_AS(read_png(dir / "missing.png"), DataError);
}

TEST_CASE("VOC import") {
  fixture::TempDir dir("voc");
  std::filesystem::create_directories(dir.path() / "Annotations");
  fixture::spit(dir.path() / "Annotations" / "0001.xml", R"(<annotation>
  <filename>0001.jpg</filename>
  <size><width>100</width><height>80</height><depth>3</depth></size>
  <style>cubism</style>
  <object><name>person</name><difficult>1</difficult>
    <bndbox><xmin>11</xmin><ymin>21</ymin><xmax>40</xmax><ymax>70</ymax></bndbox></object>
  <object><name>dog</name>
    <bndbox><xmin>1</xmin><ymin>1</ymin><xmax>5</xmax><ymax>5</ymax></bndbox></object>
  <object><name>person</name>
    <bndbox><xmin>50</xmin><ymin>10</ymin><xmax>100</xmax><ymax>80</ymax></bndbox></object>
</annotation>)");
  const auto m = import_voc(dir.path(), "test");
  REQUIRE(m.entries.size() == 1);
  const auto& e = m.entries[0];
  CHECK(e.path == "JPEGImages/0001.jpg");
  CHECK(e.style == "cubism");
  REQUIRE(e.boxes.size() == 2);
  CHECK(e.boxes[0].box == BBox{10, 20, 40, 70});
  CHECK(e.boxes[0].difficult);
  CHECK(e.boxes[1].box == BBox{49, 9, 100, 80});
  CHECK(e.boxes[1].style == "cubism");
  CHECK(m.styles == std::vector<std::string>{"cubism"});

  fixture::spit(dir.path() / "Annotations" / "0002.xml", "<annotation><filename>2.jpg</filename>"
                "<object><name>person</name></object></annotation>");
  CHECK_THROWS_AS(import_voc(dir.path(), "test"), DataError);
  CHECK_THROWS_AS(import_voc(dir / "nothing", "test"), DataError);
}

TEST_CASE("detections CSV round trip") {
  fixture::TempDir dir("dets");
  const std::vector<Detection> dets{{"images/a b.png", {1.25, 2, 30.5, 40}, 0.875},
                                    {"c.png", {0, 0, 1, 1}, 0.1 + 0.2}};
  write_detections_csv(dets, dir / "d.csv");
  CHECK(fixture::slurp(dir / "d.csv").rfind("image_id,x1,y1,x2,y2,score\n", 0) == 0);
  CHECK(read_detections_csv(dir / "d.csv") == dets);
  fixture::spit(dir / "bad.csv", "image_id,x1,y1,x2,y2,score\na,1,2,3\n");
  CHECK_THROWS_AS(read_detections_csv(dir / "bad.csv"), DataError);
}

TEST_CASE("proposal CSV round trip") {
  fixture::TempDir dir("props");
  ProposalSet set{"a.png", {{{1, 2, 30, 40}, 0}, {{0.5, 0, 10, 10}, 1}}};
  write_proposals_csv(set, dir / "p.csv");
  CHECK(read_proposals_csv(dir / "p.csv") == set.boxes());
  CHECK(proposal_file_name("images/train_00001.png") == "images_train_00001.csv");
}
