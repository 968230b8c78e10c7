#include "crisis/textprep.hpp"
#include "crisis/triage.hpp"
#include "crisis/utf8.hpp"
#include "generators.hpp"
#include "unicode_checks.hpp"

#include <gtest/gtest.h>


using namespace crisis;
using testgen::digits_of;
using testgen::is_emoji_or_control;

namespace {

const HeuristicLocaleDetector& detector() {
    static const auto d = HeuristicLocaleDetector::from_directory(std::string(CRISIS_DATA_DIR) + "/stopwords");
    return d;
}

}  // namespace

TEST(CleanText, Examples) {
    EXPECT_EQ(clean_text("🔥🔥 Fire at 5th Ave!!"), "Fire at 5th Ave!!");
    EXPECT_EQ(clean_text(""), "");
    EXPECT_EQ(clean_text("help   \t me\n"), "help me");
    EXPECT_EQ(clean_text("Enkaz altındayım 🙏🏻 #deprem @afad"), "Enkaz altındayım deprem afad");
    EXPECT_EQ(clean_text("don't-stop, ok? yes."), "don't-stop, ok? yes.");
    EXPECT_EQ(clean_text("e\xCC\x81t\xC3\xA9"), "e\xCC\x81t\xC3\xA9");  // combining accent survives
    EXPECT_EQ(clean_text("a‍b c"), "ab c");
}

TEST(CleanText, FuzzProperties) {
    std::mt19937_64 rng(20230206);
    for (int i = 0; i < 10000; ++i) {
        const std::string raw = testgen::fuzz_text(rng);
        const std::string once = clean_text(raw);
        ASSERT_EQ(clean_text(once), once) << "not idempotent on input #" << i;
        ASSERT_LE(utf8::length(once), utf8::length(raw));
        ASSERT_EQ(digits_of(once), digits_of(raw));
        for (char32_t cp : utf8::decode(once)) ASSERT_FALSE(is_emoji_or_control(cp)) << std::hex << +cp;
        ASSERT_EQ(once.find("  "), std::string::npos);
        if (!once.empty()) {
            ASSERT_NE(once.front(), ' ');
            ASSERT_NE(once.back(), ' ');
        }
    }
}

TEST(CleanText, ContactSurvivesCleaning) {
    const std::string raw = "📞 call me 0532-111-2233 🙏 trapped";
    const auto before = extract_entities(raw).contact;
    const auto after = extract_entities(clean_text(raw)).contact;
    ASSERT_TRUE(before && after);
    EXPECT_EQ(*before, *after);
}

TEST(ShortFilter, Examples) {
    EXPECT_TRUE(is_too_short("help", 3));
    EXPECT_FALSE(is_too_short("trapped under rubble", 3));
    EXPECT_TRUE(is_too_short("", 1));
    EXPECT_EQ(token_count("a b  c"), 3u);
}

TEST(WordTokens, LowercasesAndSplits) {
    EXPECT_EQ(word_tokens("Help! Trapped@Antakya, 5th-floor"),
              (std::vector<std::string>{"help", "trapped", "antakya", "5th", "floor"}));
    EXPECT_TRUE(contains_phrase(word_tokens("Power lines are down"), "power lines"));
    EXPECT_FALSE(contains_phrase(word_tokens("power outage lines"), "power lines"));
}

TEST(Locale, Examples) {
    EXPECT_EQ(detector().detect("yardım edin enkaz altındayım"), "tr");
    EXPECT_EQ(detector().detect("help me please"), "en");
    EXPECT_EQ(detector().detect("12345"), std::nullopt);
    EXPECT_EQ(detector().detect("Пожалуйста помогите"), "ru");
    EXPECT_EQ(detector().detect("الرجاء المساعدة"), "ar");
}

TEST(Prepare, PipelineOrder) {
    const auto kept = prepare("🔥 yardım edin enkaz altındayım", &detector());
    EXPECT_FALSE(kept.dropped);
    EXPECT_EQ(kept.locale_tag, "tr");
    const auto dropped = prepare("ok 👍", &detector());
    EXPECT_TRUE(dropped.dropped);
    EXPECT_FALSE(dropped.locale_tag);  // dropped messages skip detection
}
