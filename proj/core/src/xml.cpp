#include "depman/xml.hpp"

#include "depman/error.hpp"

#include <algorithm>
#include <charconv>

namespace depman {

const std::string* DescriptorNode::attribute(std::string_view key) const {
    auto it = attributes.find(std::string(key));
    return it == attributes.end() ? nullptr : &it->second;
}

std::string DescriptorNode::attribute_or(std::string_view key, std::string_view fallback) const {
    const std::string* v = attribute(key);
    return v ? *v : std::string(fallback);
}

namespace {

bool is_alpha(char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }
bool is_name_char(char c) { return is_alpha(c) || is_digit(c) || c == '_' || c == '-'; }

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

class Parser {
public:
    explicit Parser(std::string_view in) : in_(in) {}

    DescriptorNode document() {
        skip_prolog();
        if (!starts_with("<")) fail("expected root element");
        DescriptorNode root = element();
        skip_misc();
        if (pos_ != in_.size()) fail("content after root element");
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        auto line = 1 + std::count(in_.begin(), in_.begin() + static_cast<std::ptrdiff_t>(std::min(pos_, in_.size())), '\n');
        throw Error(Errc::MalformedDescriptor, "line " + std::to_string(line) + ": " + what);
    }

    bool eof() const { return pos_ >= in_.size(); }
    char peek() const { return eof() ? '\0' : in_[pos_]; }
    bool starts_with(std::string_view s) const { return in_.substr(pos_).starts_with(s); }

    void expect(std::string_view s) {
        if (!starts_with(s)) fail("expected '" + std::string(s) + "'");
        pos_ += s.size();
    }

    void skip_space() {
        while (!eof() && is_space(in_[pos_])) ++pos_;
    }

    void skip_comment() {
        pos_ += 4;
        auto end = in_.find("-->", pos_);
        if (end == std::string_view::npos) fail("unterminated comment");
        pos_ = end + 3;
    }

    void skip_misc() {
        for (;;) {
            skip_space();
            if (starts_with("<!--")) {
                skip_comment();
            } else {
                return;
            }
        }
    }

    void skip_prolog() {
        if (starts_with("\xEF\xBB\xBF")) pos_ += 3;
        if (starts_with("<?xml") && pos_ + 5 < in_.size() && is_space(in_[pos_ + 5])) {
            auto end = in_.find("?>", pos_);
            if (end == std::string_view::npos) fail("unterminated XML declaration");
            pos_ = end + 2;
        }
        skip_misc();
        if (starts_with("<!DOCTYPE")) fail("DOCTYPE not supported");
        if (starts_with("<?")) fail("processing instructions not supported");
    }

    std::string name() {
        std::size_t start = pos_;
        if (eof() || !is_alpha(in_[pos_])) fail("invalid name");
        while (!eof() && is_name_char(in_[pos_])) ++pos_;
        return std::string(in_.substr(start, pos_ - start));
    }

    void reference(std::string& out) {
        ++pos_; // '&'
        auto end = in_.find(';', pos_);
        if (end == std::string_view::npos || end - pos_ > 10) fail("unterminated entity reference");
        std::string_view ent = in_.substr(pos_, end - pos_);
        pos_ = end + 1;
        if (ent == "lt") out += '<';
        else if (ent == "gt") out += '>';
        else if (ent == "amp") out += '&';
        else if (ent == "quot") out += '"';
        else if (ent == "apos") out += '\'';
        else if (ent.size() > 1 && ent[0] == '#') {
            int base = 10;
            std::string_view digits = ent.substr(1);
            if (!digits.empty() && digits[0] == 'x') {
                base = 16;
                digits = digits.substr(1);
            }
            std::uint32_t cp = 0;
            auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), cp, base);
            if (digits.empty() || ec != std::errc{} || p != digits.data() + digits.size() || cp == 0 ||
                cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
                fail("bad character reference");
            }
            append_utf8(out, cp);
        } else {
            fail("unknown entity '" + std::string(ent) + "'");
        }
    }

    std::string attribute_value() {
        char quote = peek();
        if (quote != '"' && quote != '\'') fail("expected quoted attribute value");
        ++pos_;
        std::string value;
        for (;;) {
            if (eof()) fail("unterminated attribute value");
            char c = in_[pos_];
            if (c == quote) {
                ++pos_;
                return value;
            }
            if (c == '<') fail("'<' in attribute value");
            if (c == '&') {
                reference(value);
            } else {
                value += c;
                ++pos_;
            }
        }
    }

    DescriptorNode element() {
        if (++depth_ > 256) fail("nesting too deep");
        expect("<");
        DescriptorNode node;
        node.name = name();
        for (;;) {
            bool spaced = !eof() && is_space(peek());
            skip_space();
            if (starts_with("/>")) {
                pos_ += 2;
                --depth_;
                return node;
            }
            if (starts_with(">")) {
                ++pos_;
                break;
            }
            if (!spaced) fail("expected whitespace before attribute");
            std::string key = name();
            skip_space();
            expect("=");
            skip_space();
            std::string value = attribute_value();
            if (!node.attributes.emplace(std::move(key), std::move(value)).second) fail("duplicate attribute");
        }

        std::string text;
        bool significant_text = false;
        for (;;) {
            if (eof()) fail("unterminated element <" + node.name + ">");
            if (starts_with("</")) {
                pos_ += 2;
                if (name() != node.name) fail("mismatched end tag for <" + node.name + ">");
                skip_space();
                expect(">");
                break;
            }
            if (starts_with("<!--")) {
                skip_comment();
                continue;
            }
            if (starts_with("<![CDATA[")) fail("CDATA not supported");
            if (starts_with("<?")) fail("processing instructions not supported");
            if (starts_with("<!")) fail("markup declaration not supported");
            if (peek() == '<') {
                node.children.push_back(element());
                continue;
            }
            char c = in_[pos_];
            if (c == '&') {
                reference(text);
                significant_text = true;
            } else {
                if (!is_space(c)) significant_text = true;
                text += c;
                ++pos_;
            }
        }
        if (!node.children.empty()) {
            if (significant_text) fail("mixed content in <" + node.name + ">");
        } else if (!text.empty()) {
            node.text = std::move(text);
        }
        --depth_;
        return node;
    }

    std::string_view in_;
    std::size_t pos_ = 0;
    int depth_ = 0;
};

void escape_text(std::string& out, std::string_view s) {
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '\r': out += "&#13;"; break;
        default: out += c;
        }
    }
}

void escape_attribute(std::string& out, std::string_view s) {
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '"': out += "&quot;"; break;
        case '\t': out += "&#9;"; break;
        case '\n': out += "&#10;"; break;
        case '\r': out += "&#13;"; break;
        default: out += c;
        }
    }
}

void write_canonical(std::string& out, const DescriptorNode& node) {
    out += '<';
    out += node.name;
    for (const auto& [key, value] : node.attributes) { // std::map: bytewise order
        out += ' ';
        out += key;
        out += "=\"";
        escape_attribute(out, value);
        out += '"';
    }
    bool has_text = node.text && !node.text->empty();
    if (!has_text && node.children.empty()) {
        out += "/>";
        return;
    }
    out += '>';
    if (has_text) escape_text(out, *node.text);
    for (const auto& child : node.children) write_canonical(out, child);
    out += "</";
    out += node.name;
    out += '>';
}

struct PathStep {
    std::string element;
    std::optional<std::pair<std::string, std::string>> predicate;
};

std::vector<PathStep> parse_path(std::string_view path) {
    auto bad = [&](const char* why) -> Error {
        return Error(Errc::MalformedPath, std::string(why) + " in '" + std::string(path) + "'");
    };
    if (path.empty() || path[0] != '/') throw bad("path must be absolute");
    std::vector<PathStep> steps;
    std::size_t i = 1;
    while (true) {
        PathStep step;
        std::size_t start = i;
        while (i < path.size() && is_name_char(path[i])) ++i;
        step.element = std::string(path.substr(start, i - start));
        if (!is_xml_name(step.element)) throw bad("invalid element name");
        if (i < path.size() && path[i] == '[') {
            if (path.substr(i, 2) != "[@") throw bad("expected [@");
            i += 2;
            std::size_t astart = i;
            while (i < path.size() && is_name_char(path[i])) ++i;
            std::string attr(path.substr(astart, i - astart));
            if (!is_xml_name(attr)) throw bad("invalid attribute name");
            if (path.substr(i, 2) != "='") throw bad("expected ='");
            i += 2;
            auto close = path.find('\'', i);
            if (close == std::string_view::npos) throw bad("unterminated literal");
            std::string value(path.substr(i, close - i));
            i = close + 1;
            if (i >= path.size() || path[i] != ']') throw bad("expected ]");
            ++i;
            step.predicate.emplace(std::move(attr), std::move(value));
        }
        steps.push_back(std::move(step));
        if (i == path.size()) break;
        if (path[i] != '/') throw bad("unexpected character");
        ++i;
    }
    return steps;
}

bool step_matches(const PathStep& step, const DescriptorNode& node) {
    if (node.name != step.element) return false;
    if (!step.predicate) return true;
    const std::string* v = node.attribute(step.predicate->first);
    return v && *v == step.predicate->second;
}

void collect(const DescriptorNode& node, const std::vector<PathStep>& steps, std::size_t depth,
             std::vector<const DescriptorNode*>& out) {
    if (!step_matches(steps[depth], node)) return;
    if (depth + 1 == steps.size()) {
        out.push_back(&node);
        return;
    }
    for (const auto& child : node.children) collect(child, steps, depth + 1, out);
}

} // namespace

bool is_xml_name(std::string_view name) noexcept {
    if (name.empty() || !is_alpha(name[0])) return false;
    return std::all_of(name.begin(), name.end(), is_name_char);
}

DescriptorNode parse_xml(std::string_view data) {
    return Parser(data).document();
}

std::string canonical_bytes(const DescriptorNode& node) {
    std::string out;
    write_canonical(out, node);
    return out;
}

std::vector<const DescriptorNode*> query(const DescriptorNode& root, std::string_view path) {
    auto steps = parse_path(path);
    std::vector<const DescriptorNode*> out;
    collect(root, steps, 0, out);
    return out;
}

} // namespace depman
