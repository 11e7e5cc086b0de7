#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace depman {

/// One element of a deployment descriptor. Nodes carry either text or
/// child elements, never both.
struct DescriptorNode {
    std::string name;
    std::map<std::string, std::string> attributes;
    std::optional<std::string> text;
    std::vector<DescriptorNode> children;

    const std::string* attribute(std::string_view key) const;
    std::string attribute_or(std::string_view key, std::string_view fallback) const;

    friend bool operator==(const DescriptorNode&, const DescriptorNode&) = default;
};

/// True when `name` matches `[A-Za-z][A-Za-z0-9_-]*`.
bool is_xml_name(std::string_view name) noexcept;

/// Parses the descriptor XML subset: elements, attributes, text, character
/// and the five predefined entity references. An XML declaration and
/// comments are skipped; CDATA, DOCTYPE, processing instructions and mixed
/// content are rejected. Throws Error{MalformedDescriptor} with the line.
DescriptorNode parse_xml(std::string_view data);

/// Canonical UTF-8 form: attributes sorted bytewise by name, no whitespace
/// between elements, empty nodes self-closed.
std::string canonical_bytes(const DescriptorNode& node);

/// Evaluates an absolute path such as `/unit/reference[@name='jdbc/DB']`
/// and returns matches in document order. Throws Error{MalformedPath}.
std::vector<const DescriptorNode*> query(const DescriptorNode& root, std::string_view path);

} // namespace depman
