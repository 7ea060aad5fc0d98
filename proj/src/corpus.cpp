#include "tagctx/corpus.hpp"

#include "tagctx/tagging.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace tagctx::corpus {

namespace {

std::string trim(std::string_view s) {
    std::size_t begin = 0;
    std::size_t end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return std::string(s.substr(begin, end - begin));
}

/// Parses one line of a numbered question list. Accepted markers: "1.",
/// "1)", "Q1:". A line without a marker yields nullopt.
std::optional<std::string> parse_list_item(std::string_view line) {
    std::string text = trim(line);
    if (text.empty()) return std::nullopt;
    std::size_t i = 0;
    if (text[i] == 'Q' || text[i] == 'q') ++i;
    std::size_t digits = i;
    while (digits < text.size() && std::isdigit(static_cast<unsigned char>(text[digits]))) {
        ++digits;
    }
    if (digits == i) return std::nullopt;
    if (digits >= text.size()) return std::nullopt;
    char marker = text[digits];
    bool q_form = i == 1;
    if ((q_form && marker != ':') || (!q_form && marker != '.' && marker != ')')) {
        return std::nullopt;
    }
    std::string item = trim(text.substr(digits + 1));
    if (item.empty()) return std::nullopt;
    return item;
}

} // namespace

void DocumentStore::add(SourceDocument doc) { docs_.push_back(std::move(doc)); }

const SourceDocument* DocumentStore::find(const std::string& doc_id) const {
    for (const auto& doc : docs_) {
        if (doc.doc_id == doc_id) return &doc;
    }
    return nullptr;
}

SourceDocument ingest_document(std::string_view raw_text, std::string_view topic,
                               std::string_view doc_id) {
    SourceDocument doc;
    doc.topic = std::string(topic);
    doc.doc_id = doc_id.empty() ? doc.topic : std::string(doc_id);

    std::size_t pos = 0;
    int line_no = 0;
    while (pos <= raw_text.size()) {
        auto nl = raw_text.find('\n', pos);
        auto raw_line = nl == std::string_view::npos ? raw_text.substr(pos)
                                                     : raw_text.substr(pos, nl - pos);
        std::string text = trim(raw_line);
        if (!text.empty()) {
            doc.lines.push_back(SourceLine{doc.doc_id, ++line_no, std::move(text), {}});
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }

    if (doc.lines.empty()) {
        throw EmptyDocumentError("document for topic '" + doc.topic + "' has no non-blank lines");
    }
    return doc;
}

SourceDocument summarize_document(const SourceDocument& doc, backend::Backend& be,
                                  const SummarizeOptions& opts) {
    if (opts.window < 1) throw Error("summarize window must be >= 1");

    SourceDocument summary;
    summary.doc_id = doc.doc_id + "-summary";
    summary.topic = doc.topic;

    const std::size_t window = static_cast<std::size_t>(opts.window);
    int line_no = 0;
    for (std::size_t begin = 0; begin < doc.lines.size(); begin += window) {
        std::size_t end = std::min(begin + window, doc.lines.size());
        OriginSpan span{doc.doc_id, doc.lines[begin].line_no, doc.lines[end - 1].line_no};

        std::string group_text;
        for (std::size_t i = begin; i < end; ++i) {
            if (i > begin) group_text.push_back('\n');
            group_text += doc.lines[i].text;
        }

        backend::Completion completion;
        try {
            completion = be.complete({opts.engine, opts.instruction, group_text});
        } catch (const backend::Error& e) {
            throw SummarizeBackendError("summarization failed for lines " +
                                            std::to_string(span.first_line) + "-" +
                                            std::to_string(span.last_line) + ": " + e.what(),
                                        span);
        }

        for (auto& sentence : tagging::segment_sentences(completion.text)) {
            summary.lines.push_back(
                SourceLine{summary.doc_id, ++line_no, std::move(sentence), span});
        }
    }
    return summary;
}

std::vector<Question> generate_questions(const SourceDocument& context, backend::Backend& be,
                                         const GenerateQuestionsOptions& opts) {
    if (opts.n < 1) throw Error("question count must be >= 1");

    std::string instruction =
        "Write " + std::to_string(opts.n) +
        " questions that the following text can answer. Respond with a numbered list, "
        "one question per line.";
    std::string input;
    for (const auto& line : context.lines) {
        if (!input.empty()) input.push_back('\n');
        input += line.text;
    }

    auto completion = be.complete({opts.engine, instruction, input});

    std::vector<Question> questions;
    std::vector<std::string> unnumbered;
    std::istringstream lines(completion.text);
    std::string line;
    while (std::getline(lines, line)) {
        if (auto item = parse_list_item(line)) {
            questions.push_back(Question{"", context.topic, *item});
        } else if (!trim(line).empty()) {
            unnumbered.push_back(trim(line));
        }
    }
    // Degenerate single-question replies often come back without a marker.
    if (questions.empty() && opts.n == 1 && unnumbered.size() == 1) {
        questions.push_back(Question{"", context.topic, unnumbered.front()});
    }

    if (static_cast<int>(questions.size()) < opts.n) {
        auto recovered = questions;
        for (std::size_t i = 0; i < recovered.size(); ++i) {
            recovered[i].question_id = context.topic + "-q" + std::to_string(i + 1);
        }
        throw ParseError("expected " + std::to_string(opts.n) + " questions but recovered " +
                             std::to_string(questions.size()) + " from engine " + opts.engine,
                         std::move(recovered));
    }

    questions.resize(static_cast<std::size_t>(opts.n));
    for (std::size_t i = 0; i < questions.size(); ++i) {
        questions[i].question_id = context.topic + "-q" + std::to_string(i + 1);
    }
    return questions;
}

void to_json(nlohmann::json& j, const OriginSpan& s) {
    j = nlohmann::json{{"doc_id", s.doc_id}, {"first_line", s.first_line},
                       {"last_line", s.last_line}};
}

void from_json(const nlohmann::json& j, OriginSpan& s) {
    j.at("doc_id").get_to(s.doc_id);
    j.at("first_line").get_to(s.first_line);
    j.at("last_line").get_to(s.last_line);
}

void to_json(nlohmann::json& j, const SourceLine& l) {
    j = nlohmann::json{{"line_no", l.line_no}, {"text", l.text}};
    if (l.origin_span) j["origin_span"] = *l.origin_span;
}

void from_json(const nlohmann::json& j, SourceLine& l) {
    j.at("line_no").get_to(l.line_no);
    j.at("text").get_to(l.text);
    if (j.contains("origin_span")) l.origin_span = j.at("origin_span").get<OriginSpan>();
}

void to_json(nlohmann::json& j, const SourceDocument& d) {
    j = nlohmann::json{{"doc_id", d.doc_id}, {"topic", d.topic}, {"lines", d.lines}};
}

void from_json(const nlohmann::json& j, SourceDocument& d) {
    j.at("doc_id").get_to(d.doc_id);
    j.at("topic").get_to(d.topic);
    j.at("lines").get_to(d.lines);
    for (auto& line : d.lines) line.doc_id = d.doc_id;
}

void to_json(nlohmann::json& j, const Question& q) {
    j = nlohmann::json{{"question_id", q.question_id}, {"topic", q.topic}, {"text", q.text}};
}

void from_json(const nlohmann::json& j, Question& q) {
    j.at("question_id").get_to(q.question_id);
    j.at("topic").get_to(q.topic);
    j.at("text").get_to(q.text);
}

std::vector<SourceDocument> load_documents(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open documents file: " + path);
    nlohmann::json j;
    in >> j;
    return j.get<std::vector<SourceDocument>>();
}

void save_documents(const std::vector<SourceDocument>& docs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write documents file: " + path);
    out << nlohmann::json(docs).dump(2) << '\n';
}

std::vector<Question> load_questions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open questions file: " + path);
    nlohmann::json j;
    in >> j;
    return j.get<std::vector<Question>>();
}

void save_questions(const std::vector<Question>& questions, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write questions file: " + path);
    out << nlohmann::json(questions).dump(2) << '\n';
}

} // namespace tagctx::corpus
