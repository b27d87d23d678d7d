#pragma once

// Labeled instruction corpora: JSONL I/O, stratified train/test splitting and
// a seeded template generator with one lexicon per manipulation task.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ats/errors.hpp"

namespace ats {

enum class Split { train, test };

struct LabeledInstruction {
    std::string text;
    std::int64_t task_id = 0;
    Split split = Split::train;

    bool operator==(const LabeledInstruction&) const = default;
};

using Corpus = std::vector<LabeledInstruction>;

inline std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

inline nlohmann::json to_json_line(const LabeledInstruction& row)
{
    return nlohmann::json{{"text", row.text}, {"task_id", row.task_id}, {"split", std::string(to_string(row.split))}};
}

inline void write_corpus(const Corpus& corpus, std::ostream& out)
{
    for (const auto& row : corpus)
        out << to_json_line(row).dump() << '\n';
}

/// Reads {"text", "task_id", "split"} lines; "split" defaults to train.
inline Corpus read_corpus(std::istream& in)
{
    Corpus corpus;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const std::string where = "corpus line " + std::to_string(lineno);
        try {
            const auto j = nlohmann::json::parse(line);
            LabeledInstruction row;
            row.text = j.at("text").get<std::string>();
            row.task_id = j.at("task_id").get<std::int64_t>();
            const auto split = j.value("split", std::string("train"));
            if (split == "train")
                row.split = Split::train;
            else if (split == "test")
                row.split = Split::test;
            else
                throw FormatError(where + ": split must be \"train\" or \"test\"");
            corpus.push_back(std::move(row));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(where + ": " + e.what());
        }
    }
    return corpus;
}

inline Corpus read_corpus_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open corpus " + path.string());
    return read_corpus(in);
}

/// Sorted distinct task ids.
inline std::vector<std::int64_t> corpus_classes(const Corpus& corpus)
{
    std::set<std::int64_t> ids;
    for (const auto& row : corpus)
        ids.insert(row.task_id);
    return {ids.begin(), ids.end()};
}

/// Per-class stratified split: floor(fraction * n) rows of each class go to
/// train (at least one, and at least one left for test when n >= 2).
inline void assign_splits(Corpus& corpus, double train_fraction, std::uint64_t seed)
{
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("train fraction must lie in (0, 1)");
    std::map<std::int64_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < corpus.size(); ++i)
        by_class[corpus[i].task_id].push_back(i);
    for (auto& [task, rows] : by_class) {
        std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(task));
        std::shuffle(rows.begin(), rows.end(), rng);
        auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(rows.size())));
        n_train = std::clamp<std::size_t>(n_train, 1, rows.size() > 1 ? rows.size() - 1 : 1);
        for (std::size_t k = 0; k < rows.size(); ++k)
            corpus[rows[k]].split = k < n_train ? Split::train : Split::test;
    }
}

struct TaskLexicon {
    std::string_view name;
    std::vector<std::string_view> verbs;
    std::vector<std::string_view> objects;
    std::vector<std::string_view> tails;
};

/// Ten tabletop tasks. Object phrases are class specific; verbs and tails
/// overlap between some classes on purpose.
inline const std::vector<TaskLexicon>& task_lexicons()
{
    static const std::vector<TaskLexicon> lex = {
        {"pick up the banana",
         {"pick up", "grab", "take", "lift", "fetch"},
         {"the banana", "the yellow banana", "that banana", "the ripe banana"},
         {"and place it in the basket", "and put it into the basket", "and drop it in the basket",
          "and move it to the basket", "then leave it in the basket"}},
        {"stack the tomatoes",
         {"stack", "pile", "stack up", "put together", "arrange"},
         {"the tomatoes", "the red tomatoes", "both tomatoes", "the two tomatoes"},
         {"on top of each other", "into a small tower", "one above the other", "neatly on the plate",
          "carefully in a stack"}},
        {"place the stapler",
         {"place", "put", "set", "position", "move"},
         {"the stapler", "the black stapler", "that stapler", "the office stapler"},
         {"on the desk", "next to the notebook", "beside the paper tray", "at the corner of the table",
          "in the drawer"}},
        {"select a die",
         {"select", "choose", "pick", "find", "point at"},
         {"the die", "the dice", "a die", "the white die"},
         {"showing six", "with six dots on top", "from the dice cup", "that rolled highest", "on the game board"}},
        {"pour half a glass of water",
         {"pour", "fill", "dispense", "serve", "tip out"},
         {"half a glass of water", "water into the glass", "some water", "a half glass of water"},
         {"from the bottle", "from the jug", "without spilling", "slowly", "up to the middle"}},
        {"pick up the cube",
         {"pick up", "grab", "lift", "take", "hold"},
         {"the cube", "the wooden cube", "the small cube", "the blue block"},
         {"from the table", "and raise it", "off the tray", "and hold it steady", "near the edge"}},
        {"redirect the rubik's cube",
         {"rotate", "turn", "twist", "redirect", "reorient"},
         {"the rubik's cube", "the puzzle cube", "the rubiks cube", "the colorful puzzle"},
         {"so the red face points up", "to face the camera", "by ninety degrees", "clockwise",
          "until the white side is on top"}},
        {"control the robot dog",
         {"command", "tell", "make", "order", "guide"},
         {"the robot dog", "the robotic dog", "the quadruped", "the dog robot"},
         {"to sit down", "to walk forward", "to turn left", "to come here", "to stop and stand"}},
        {"stack the cans",
         {"stack", "pile", "stack up", "build a tower with", "place"},
         {"the cans", "the soda cans", "the tin cans", "the three cans"},
         {"on top of each other", "into a pyramid", "in a neat column", "on the shelf", "one over another"}},
        {"pick up the corn",
         {"pick up", "grab", "take", "lift", "collect"},
         {"the corn", "the ear of corn", "the corn cob", "the yellow corn"},
         {"and place it in the basket", "and put it into the basket", "and drop it in the basket",
          "and move it to the basket", "then leave it in the basket"}},
    };
    return lex;
}

inline constexpr std::array<std::string_view, 5> kInstructionPrefixes = {"", "please ", "robot, ", "could you ",
                                                                         "now "};

/// Distinct instructions a lexicon can produce.
inline std::vector<std::string> enumerate_instructions(const TaskLexicon& lex)
{
    std::set<std::string> out;
    for (auto prefix : kInstructionPrefixes)
        for (auto verb : lex.verbs)
            for (auto obj : lex.objects)
                for (auto tail : lex.tails)
                    out.insert(std::string(prefix) + std::string(verb) + " " + std::string(obj) + " " +
                               std::string(tail));
    return {out.begin(), out.end()};
}

/// n_classes x per_class unique instructions, task ids 0..n_classes-1, split
/// per class with the given train fraction. Deterministic in seed.
inline Corpus generate_synthetic_corpus(int n_classes, int per_class, std::uint64_t seed,
                                        double train_fraction = 0.8)
{
    const auto& lexicons = task_lexicons();
    if (n_classes < 2)
        throw std::invalid_argument("synthetic corpus needs at least 2 classes");
    if (per_class < 10)
        throw std::invalid_argument("synthetic corpus needs at least 10 instructions per class");
    if (n_classes > static_cast<int>(lexicons.size()))
        throw std::invalid_argument("synthetic corpus supports at most " + std::to_string(lexicons.size()) +
                                    " classes");

    Corpus corpus;
    corpus.reserve(static_cast<std::size_t>(n_classes) * static_cast<std::size_t>(per_class));
    for (int c = 0; c < n_classes; ++c) {
        auto pool = enumerate_instructions(lexicons[static_cast<std::size_t>(c)]);
        if (static_cast<int>(pool.size()) < per_class)
            throw std::invalid_argument("class " + std::to_string(c) + " can produce only " +
                                        std::to_string(pool.size()) + " unique instructions");
        std::mt19937_64 rng(seed ^ (0xa5a5a5a5ULL + static_cast<std::uint64_t>(c) * 0x9e3779b97f4a7c15ULL));
        std::shuffle(pool.begin(), pool.end(), rng);
        for (int i = 0; i < per_class; ++i)
            corpus.push_back({pool[static_cast<std::size_t>(i)], c, Split::train});
    }
    assign_splits(corpus, train_fraction, seed);
    return corpus;
}

} // namespace ats
