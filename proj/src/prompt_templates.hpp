#pragma once

// Prompt text resources. Placeholders are {lower_snake_case} names filled in by
// render_template. With domain cues on, every "item" in these texts becomes
// "movie" before rendering, so placeholder names never contain that word.

namespace grpbench::templates {

constexpr auto kTaskFraming =
    "You are helping a group of people choose one item to enjoy together. "
    "Every group member has rated every item. Apply the social choice-based "
    "aggregation strategy described below to the group's ratings and report "
    "the item that the strategy recommends.";

constexpr auto kStrategyHeader = "Strategy:";

constexpr auto kExplainADD =
    "Additive Utilitarian (ADD): for every item, add up the ratings given by all "
    "group members. The strategy recommends the item with the highest sum of all "
    "group members' ratings.";

constexpr auto kExplainAPP =
    "Approval Voting (APP): a group member approves a given item when their rating for "
    "it is {threshold} or higher. For every item, count how many group members "
    "approve it. The strategy recommends the item with the highest number of "
    "ratings at or above the approval threshold of {threshold}.";

constexpr auto kExplainLMS =
    "Least Misery (LMS): for every item, look at the lowest rating given by any "
    "group member, since the group is only as happy as its least happy member. "
    "The strategy recommends the item which has the highest of all lowest "
    "per-item ratings.";

constexpr auto kExplainMPL =
    "Most Pleasure (MPL): for every item, look at the highest rating given by any "
    "group member. The strategy recommends the item with the highest individual "
    "group member rating.";

constexpr auto kIntroJsonItem =
    "The group's ratings are given below as a JSON object that maps every item to "
    "the list of ratings it received from the group members:";

constexpr auto kIntroJsonUser =
    "The group's ratings are given below as a JSON object that maps every group "
    "member to their rating for each item:";

constexpr auto kIntroDataframe =
    "The group's ratings are given below as a table with one row per group member "
    "and one column per item:";

constexpr auto kTieInstruction =
    "If several items are tied under the strategy, recommend all of the tied items "
    "as a list.";

constexpr auto kOutputContract =
    "Return your answer only as a JSON object with the keys \"strategy\" and "
    "\"recommendation\". Set \"strategy\" to \"{strategy_code}\" and set "
    "\"recommendation\" to the list of recommended items, written exactly as "
    "they appear in the ratings.";

constexpr auto kOutputContractExplained =
    "Return your answer only as a JSON object with the keys \"strategy\", "
    "\"recommendation\" and \"explanation\". Set \"strategy\" to "
    "\"{strategy_code}\" and set \"recommendation\" to the list of recommended "
    "items, written exactly as they appear in the ratings.";

// Quoted verbatim; the domain-cue rewrite never touches it since it has no "item".
constexpr auto kExplanationRequest =
    "Provide a short explanation detailing how you derived the recommendation. "
    "Explain to the group how the strategy works and why the output is being "
    "recommended to them.";

constexpr auto kExplanationPlacement = "Put this explanation under the \"explanation\" key.";

constexpr auto kRankedInstruction =
    "Instead of only the winning items, rank the items using the strategy and "
    "return the top {k} items, best first. The \"recommendation\" value must be an "
    "ordered JSON list of exactly {k} items.";

constexpr auto kIclHeader =
    "Here are three solved examples that use the same strategy on other groups.";

constexpr auto kIclExample =
    "If the input would be {group_table}, the correct recommendation would be "
    "{correct_output}.";

}  // namespace grpbench::templates
