#include <gtest/gtest.h>

#include <fstream>

#include "mimlnd/io.hpp"
#include "test_util.hpp"

using namespace mimlnd;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::string expect_format_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    return e.what();
  }
  ADD_FAILURE() << "no FormatError";
  return {};
}

}  // namespace

TEST(Csv, EmptyLabelCellGivesEmptyLabelSet) {
  const auto dir = tutil::temp_dir("csv_ok");
  write_text(dir / "i.csv",
             "bag_id,instance_id,true_class,f0,f1\n"
             "b1,0,a,0.5,1\nb1,1,-,1.5,2\nb2,0,b,-1,3e-2\n");
  write_text(dir / "l.csv", "bag_id,labels\nb1,a;b\nb2,\n");
  const auto d = load_csv_dataset((dir / "i.csv").string(), (dir / "l.csv").string());
  ASSERT_EQ(d.bag_count(), 2u);
  EXPECT_EQ(d.known_labels(), (std::vector<Label>{"a", "b"}));
  EXPECT_EQ(d.bag(0).labels, (std::vector<Label>{"a", "b"}));
  EXPECT_TRUE(d.bag(1).labels.empty());
  EXPECT_EQ(d.dimension(), 2);
  EXPECT_EQ(d.bag(0).instances(1, 0), 1.5);
  EXPECT_EQ(d.bag(1).instances(0, 1), 0.03);
  EXPECT_FALSE(d.bag(0).true_classes.has_value());  // "-" marks an untagged row
  ASSERT_TRUE(d.bag(1).true_classes.has_value());

  const auto k = load_csv_dataset((dir / "i.csv").string(), (dir / "l.csv").string(),
                                  std::vector<Label>{"b"});
  EXPECT_EQ(k.bag(0).labels, std::vector<Label>{"b"});
}

TEST(Csv, FormatErrorsNameTheLine) {
  const auto dir = tutil::temp_dir("csv_bad");
  write_text(dir / "l.csv", "bag_id,labels\nb1,a\n");
  write_text(dir / "i.csv", "bag_id,instance_id,true_class,f0,f1\nb1,0,a,1,2\nb1,1,a,3\n");
  EXPECT_NE(expect_format_error([&] {
              load_csv_dataset((dir / "i.csv").string(), (dir / "l.csv").string());
            }).find(":3"),
            std::string::npos);
  write_text(dir / "i.csv", "bag_id,instance_id,true_class,f0\nb1,0,a,x\n");
  EXPECT_NE(expect_format_error([&] {
              load_csv_dataset((dir / "i.csv").string(), (dir / "l.csv").string());
            }).find(":2"),
            std::string::npos);
  write_text(dir / "i.csv", "bag,instance_id,true_class,f0\nb1,0,a,1\n");
  expect_format_error([&] { load_csv_dataset((dir / "i.csv").string(), (dir / "l.csv").string()); });
  write_text(dir / "i.csv", "bag_id,instance_id,true_class,f0\nb1,0,a,1\n");
  write_text(dir / "l.csv", "bag_id,labels\nb1,a\nb9,a\n");
  expect_format_error([&] { load_csv_dataset((dir / "i.csv").string(), (dir / "l.csv").string()); });
  write_text(dir / "i.csv", "bag_id,instance_id,true_class,f0\nb1,0,a,1\nb2,0,a,1\n");
  write_text(dir / "l.csv", "bag_id,labels\nb1,a\n");
  expect_format_error([&] { load_csv_dataset((dir / "i.csv").string(), (dir / "l.csv").string()); });
  EXPECT_THROW(load_csv_dataset((dir / "nope.csv").string(), (dir / "l.csv").string()), IoError);
}

// Same shape as the HJA birdsong benchmark: 548 bags, 4998 instances,
// 38 features, 13 labels.
TEST(Csv, BirdsongShapedFile) {
  const auto dir = tutil::temp_dir("csv_hja");
  Rng rng = make_rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<int> sizes(548, 9);
  for (int i = 0; i < 4998 - 548 * 9; ++i) sizes[static_cast<std::size_t>(i * 7 % 548)] += 1;
  {
    std::ofstream inst(dir / "i.csv"), lab(dir / "l.csv");
    inst << "bag_id,instance_id,true_class";
    for (int k = 0; k < 38; ++k) inst << ",f" << k;
    inst << '\n';
    lab << "bag_id,labels\n";
    for (int b = 0; b < 548; ++b) {
      for (int j = 0; j < sizes[static_cast<std::size_t>(b)]; ++j) {
        inst << "r" << b << ',' << j << ",-";
        for (int k = 0; k < 38; ++k) inst << ',' << format_double(u(rng));
        inst << '\n';
      }
      lab << "r" << b << ',';
      for (int y = 1, first = 1; y <= 13; ++y)
        if ((b + y) % 5 == 0) lab << (first ? "" : ";") << y, first = 0;
      lab << '\n';
    }
  }
  const auto d = load_csv_dataset((dir / "i.csv").string(), (dir / "l.csv").string());
  EXPECT_EQ(d.bag_count(), 548u);
  EXPECT_EQ(d.instance_count(), 4998);
  EXPECT_EQ(d.dimension(), 38);
  EXPECT_LE(d.class_count(), 13);
  EXPECT_EQ(d.known_labels().front(), "1");
  EXPECT_EQ(d.known_labels().back(), "13");  // numeric ordering
  EXPECT_NEAR(static_cast<double>(d.instance_count()) / 548.0, 9.12, 0.01);
}

TEST(Csv, WriteReadRoundTrip) {
  Rng rng = make_rng(6);
  const auto data = tutil::random_dataset(6, 4, 3, 3, rng);
  const auto dir = tutil::temp_dir("csv_rt");
  write_dataset_csv(data, (dir / "i.csv").string(), (dir / "l.csv").string());
  const auto back = load_csv_dataset((dir / "i.csv").string(), (dir / "l.csv").string(), data.known_labels());
  ASSERT_EQ(back.bag_count(), data.bag_count());
  for (std::size_t i = 0; i < data.bag_count(); ++i) {
    EXPECT_EQ(back.bag(i).instances, data.bag(i).instances);
    EXPECT_EQ(back.bag(i).labels, data.bag(i).labels);
    EXPECT_EQ(back.bag(i).true_classes, data.bag(i).true_classes);
  }
}

TEST(Doubles, ShortestRoundTrip) {
  Rng rng = make_rng(7);
  std::uniform_real_distribution<double> e(-300, 300), m(-1, 1);
  for (int t = 0; t < 1000; ++t) {
    const double v = m(rng) * std::pow(10.0, e(rng));
    EXPECT_EQ(*parse_double(format_double(v)), v);
  }
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(*parse_double("-inf"), -std::numeric_limits<double>::infinity());
  EXPECT_FALSE(parse_double("1.5x").has_value());
  EXPECT_FALSE(parse_double("").has_value());
}

TEST(ModelFile, RoundTripPreservesScores) {
  Rng rng = make_rng(8);
  ScoreModel m;
  m.kernel = {0.37};
  m.lambda = 1e-3;
  m.training = tutil::random_table(12, 3, rng);
  m.alphas = tutil::random_table(12, 3, rng);
  m.labels = {"7", "0", "z"};
  const std::vector<double> th = thresholds_from_scores({0.5, -0.25, 1.0 / 3.0});
  const auto dir = tutil::temp_dir("model_rt");
  save_model((dir / "m.json").string(), m, th);
  const auto s = load_model((dir / "m.json").string());
  EXPECT_EQ(s.model.labels, m.labels);
  EXPECT_EQ(s.model.kernel.gamma, m.kernel.gamma);
  EXPECT_EQ(s.model.lambda, m.lambda);
  EXPECT_EQ(s.thresholds, th);
  for (int t = 0; t < 10; ++t) {
    const Vector x = tutil::random_table(3, 1, rng);
    const auto a = max_score(m, x), b = max_score(s.model, x);
    EXPECT_NEAR(a.score, b.score, 1e-12);
    EXPECT_EQ(a.best_class, b.best_class);
  }
}

TEST(ModelFile, CorruptDocuments) {
  Rng rng = make_rng(9);
  ScoreModel m;
  m.kernel = {1.0};
  m.training = tutil::random_table(4, 2, rng);
  m.alphas = tutil::random_table(4, 1, rng);
  m.labels = {"a"};
  const auto dir = tutil::temp_dir("model_bad");
  const auto path = (dir / "m.json").string();
  save_model(path, m);
  std::string text;
  {
    std::ifstream in(path);
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  write_text(path, text.substr(0, text.size() / 2));
  EXPECT_THROW(load_model(path), FormatError);
  auto j = nlohmann::json::parse(text);
  j["version"] = 99;
  write_text(path, j.dump());
  EXPECT_THROW(load_model(path), FormatError);
  j = nlohmann::json::parse(text);
  j["alphas"][0].erase(0);
  write_text(path, j.dump());
  EXPECT_THROW(load_model(path), FormatError);
  EXPECT_THROW(load_model((dir / "missing.json").string()), IoError);
}

TEST(RocFile, ReplayGivesSameAuc) {
  Rng rng = make_rng(10);
  std::normal_distribution<double> n;
  std::vector<double> s;
  std::vector<bool> novel;
  for (int i = 0; i < 40; ++i) {
    novel.push_back(i % 3 == 0);
    s.push_back(n(rng) - (novel.back() ? 1.0 : 0.0));
  }
  const auto c = roc_from_scores(s, novel, thresholds_from_scores(s));
  const auto dir = tutil::temp_dir("roc");
  write_roc_csv((dir / "roc.csv").string(), c);
  const auto pts = read_roc_csv((dir / "roc.csv").string());
  ASSERT_EQ(pts.size(), c.points.size());
  EXPECT_EQ(trapezoid_auc(pts), c.auc);
  EXPECT_EQ(pts.front().threshold, -std::numeric_limits<double>::infinity());
}
