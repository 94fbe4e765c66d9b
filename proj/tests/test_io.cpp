#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <limits>

#include "alforge/csv.hpp"
#include "alforge/keyvalue.hpp"
#include "alforge/tensor_io.hpp"

namespace alforge {
namespace {

TEST(TensorIo, HeaderLayout) {
  const Tensor t({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const auto b = encode_tensor(t);
  ASSERT_EQ(b.size(), 8u + 1 + 1 + 2 * 8 + 6 * 8);
  EXPECT_EQ(std::memcmp(b.data(), "ALF0TENS", 8), 0);
  EXPECT_EQ(b[8], kTypeFloat64);
  EXPECT_EQ(b[9], 2);
  EXPECT_EQ(b[10], 2);  // little-endian dim 0
  EXPECT_EQ(b[18], 3);
  double first = 0.0;
  std::memcpy(&first, b.data() + 26, 8);
  EXPECT_EQ(first, 1.0);
}

TEST(TensorIo, RoundTripIsBitwise) {
  const Tensor t({3}, std::vector<double>{-0.0, std::numeric_limits<double>::denorm_min(), 0.1 + 0.2});
  const Tensor back = decode_float_tensor(encode_tensor(t));
  EXPECT_TRUE(back == t);
  const IntTensor i{{2, 2}, {1, -2, 3, 2147483647}};
  const IntTensor ib = decode_int_tensor(encode_tensor(i));
  EXPECT_EQ(ib.shape, i.shape);
  EXPECT_EQ(ib.data, i.data);
}

TEST(TensorIo, MalformedInputsReportOffsets) {
  auto good = encode_tensor(Tensor({2}, std::vector<double>{1, 2}));
  auto bad_magic = good;
  bad_magic[3] = 'X';
  try {
    decode_float_tensor(bad_magic);
    FAIL() << "bad magic accepted";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  auto truncated = good;
  truncated.resize(truncated.size() - 1);
  EXPECT_THROW(decode_float_tensor(truncated), FormatError);
  auto trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(decode_float_tensor(trailing), FormatError);
  EXPECT_THROW(decode_int_tensor(good), FormatError);  // wrong element type
  try {
    decode_float_tensor(std::vector<std::uint8_t>(good.begin(), good.begin() + 9));
    FAIL() << "short header accepted";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 9u);
  }
}

TEST(KeyValue, ParseFormatRoundTrip) {
  const KeyValues kv = parse_key_values("# comment\n\n  a = 1 \nb=two words\n");
  EXPECT_EQ(kv.at("a"), "1");
  EXPECT_EQ(kv.at("b"), "two words");
  EXPECT_EQ(parse_key_values(format_key_values(kv)), kv);
  EXPECT_THROW(parse_key_values("novalue\n"), ConfigError);
}

TEST(KeyValue, TypedLookups) {
  const KeyValues kv = {{"x", "0.30000000000000004"}, {"n", "12"}, {"bad", "1.5x"}};
  EXPECT_EQ(kv_double(kv, "x", 0.0), 0.1 + 0.2);
  EXPECT_EQ(kv_uint(kv, "n", 0), 12u);
  EXPECT_EQ(kv_uint(kv, "missing", 7), 7u);
  EXPECT_THROW(kv_double(kv, "bad", 0.0), ConfigError);
  EXPECT_THROW(parse_uint("-3", "n"), ConfigError);
  EXPECT_EQ(parse_size_list("1, 2,3", "l"), (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(parse_double(format_double(1.0 / 3.0), "d"), 1.0 / 3.0);
  const double tiny = std::numeric_limits<double>::denorm_min();
  EXPECT_EQ(parse_double(format_double(tiny), "d"), tiny);
  EXPECT_THROW(parse_double("1e999", "d"), ConfigError);
}

TEST(Csv, RoundTripAndSchema) {
  CsvWriter w({"name", "value", "count"});
  w.cell("a").cell(1.0 / 3.0).cell(std::size_t{5});
  w.end_row();
  w.cell("b").cell(-2.5e-300).cell(-1);
  w.end_row();
  const std::string text = w.str();
  EXPECT_EQ(text.rfind("# schema=1\n", 0), 0u);
  const CsvTable t = parse_csv(text);
  EXPECT_EQ(t.header, (std::vector<std::string>{"name", "value", "count"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.number(0, "value"), 1.0 / 3.0);
  EXPECT_EQ(t.number(1, "value"), -2.5e-300);
  EXPECT_EQ(t.text(1, "name"), "b");
  EXPECT_TRUE(t.has_column("count"));
  EXPECT_FALSE(t.has_column("nope"));
}

TEST(Csv, RejectsSchemaMismatchAndRaggedRows) {
  EXPECT_THROW(parse_csv("# schema=2\na,b\n1,2\n"), ConfigError);
  EXPECT_THROW(parse_csv("a,b\n1,2\n"), ConfigError);
  EXPECT_THROW(parse_csv("# schema=1\na,b\n1,2,3\n"), ConfigError);
  CsvWriter w({"a", "b"});
  w.cell("x");
  EXPECT_ANY_THROW(w.end_row());
}

}  // namespace
}  // namespace alforge
