#include "xml.hpp"

#include <cctype>

#include "svgsmith/error.hpp"

namespace svgsmith::svg::xml {
namespace {

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  Node document() {
    skip_bom();
    std::vector<Node> leading_comments;
    bool have_root = false;
    Node root;
    while (true) {
      skip_space();
      if (eof()) break;
      if (starts_with("<?")) {
        skip_past("?>");
      } else if (starts_with("<!--")) {
        Node c = comment();
        if (!have_root) leading_comments.push_back(std::move(c));
      } else if (starts_with("<!")) {
        skip_past(">");
      } else if (peek() == '<') {
        if (have_root) fail("multiple root elements");
        root = element();
        have_root = true;
      } else {
        fail("unexpected text outside the root element");
      }
    }
    if (!have_root) fail("missing root element");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const { throw ParseError(message, line_, col_); }

  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return eof() ? '\0' : text_[pos_]; }
  bool starts_with(std::string_view s) const { return text_.substr(pos_).starts_with(s); }

  void advance(std::size_t n = 1) {
    for (std::size_t i = 0; i < n && !eof(); ++i) {
      if (text_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
  }

  void skip_bom() {
    if (starts_with("\xEF\xBB\xBF")) pos_ += 3;
  }

  void skip_space() {
    while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) advance();
  }

  void skip_past(std::string_view terminator) {
    const auto at = text_.find(terminator, pos_);
    if (at == std::string_view::npos) fail("unterminated markup");
    advance(at + terminator.size() - pos_);
  }

  Node comment() {
    Node node;
    node.kind = Node::Kind::Comment;
    node.line = line_;
    node.column = col_;
    advance(4);
    const auto at = text_.find("-->", pos_);
    if (at == std::string_view::npos) fail("unterminated comment");
    node.name = std::string(text_.substr(pos_, at - pos_));
    advance(at + 3 - pos_);
    return node;
  }

  static bool name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == ':' ||
           c == '.';
  }

  std::string name() {
    const std::size_t start = pos_;
    while (!eof() && name_char(peek())) advance();
    if (pos_ == start) fail("expected a name");
    return std::string(text_.substr(start, pos_ - start));
  }

  std::string decode_entities(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] != '&') {
        out.push_back(raw[i]);
        continue;
      }
      const auto semi = raw.find(';', i);
      if (semi == std::string_view::npos) fail("unterminated entity in attribute");
      const auto ent = raw.substr(i + 1, semi - i - 1);
      if (ent == "amp") out.push_back('&');
      else if (ent == "lt") out.push_back('<');
      else if (ent == "gt") out.push_back('>');
      else if (ent == "quot") out.push_back('"');
      else if (ent == "apos") out.push_back('\'');
      else if (ent.starts_with("#x") || ent.starts_with("#X")) {
        out.push_back(static_cast<char>(std::stoi(std::string(ent.substr(2)), nullptr, 16)));
      } else if (ent.starts_with("#")) {
        out.push_back(static_cast<char>(std::stoi(std::string(ent.substr(1)))));
      } else {
        fail("unknown entity &" + std::string(ent) + ";");
      }
      i = semi;
    }
    return out;
  }

  Node element() {
    Node node;
    node.line = line_;
    node.column = col_;
    advance();  // '<'
    node.name = name();
    while (true) {
      skip_space();
      if (eof()) fail("unterminated start tag <" + node.name + ">");
      if (starts_with("/>")) {
        advance(2);
        return node;
      }
      if (peek() == '>') {
        advance();
        break;
      }
      std::string key = name();
      skip_space();
      if (peek() != '=') fail("expected '=' after attribute " + key);
      advance();
      skip_space();
      const char quote = peek();
      if (quote != '"' && quote != '\'') fail("attribute values must be quoted");
      advance();
      const auto end = text_.find(quote, pos_);
      if (end == std::string_view::npos) fail("unterminated attribute value");
      std::string value = decode_entities(text_.substr(pos_, end - pos_));
      advance(end + 1 - pos_);
      for (const auto& [k, v] : node.attributes)
        if (k == key) fail("duplicate attribute " + key);
      node.attributes.emplace_back(std::move(key), std::move(value));
    }
    // Content.
    while (true) {
      if (eof()) fail("missing end tag </" + node.name + ">");
      if (starts_with("</")) {
        advance(2);
        const std::string closing = name();
        if (closing != node.name)
          fail("mismatched end tag </" + closing + ">, expected </" + node.name + ">");
        skip_space();
        if (peek() != '>') fail("expected '>'");
        advance();
        return node;
      }
      if (starts_with("<!--")) {
        node.children.push_back(comment());
      } else if (starts_with("<![CDATA[")) {
        skip_past("]]>");
      } else if (starts_with("<?")) {
        skip_past("?>");
      } else if (peek() == '<') {
        node.children.push_back(element());
      } else {
        advance();  // text content is ignored
      }
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

}  // namespace

Node parse(std::string_view text) { return Reader(text).document(); }

std::string escape_attribute(std::string_view value) {
  std::string out;
  for (char c : value) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace svgsmith::svg::xml
