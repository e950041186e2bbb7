#include <gtest/gtest.h>

#include "kcmp/text.hpp"

using namespace kcmp;

TEST(Normalize, LowercaseTrimCollapse) {
  EXPECT_EQ(normalize_text("  Blue  "), "blue");
  EXPECT_EQ(normalize_text("Teddy\t  Bear"), "teddy bear");
  EXPECT_EQ(normalize_text(""), "");
  EXPECT_EQ(normalize_text("Blue"), normalize_text("blue "));
}

TEST(ListReply, SeparatorsAndDecorations) {
  const auto items = parse_list_reply("1. Cup, 2) plate;\n- Bowl.\n\"vase\"");
  EXPECT_EQ(items, (std::vector<std::string>{"cup", "plate", "bowl", "vase"}));
}

TEST(ListReply, EmptyItemsDropped) {
  EXPECT_EQ(parse_list_reply(",,\n ; "), std::vector<std::string>{});
  EXPECT_EQ(parse_list_reply("red"), std::vector<std::string>{"red"});
}

TEST(Tokenize, Whitespace) {
  EXPECT_EQ(tokenize_words(" A  b\nC "), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(join({"x", "y"}, ", "), "x, y");
}
