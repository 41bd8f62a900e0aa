// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <guimig/model.hpp>

#include <cstddef>
#include <map>
#include <string>

namespace guimig
{

inline constexpr std::size_t default_prune_budget = 60;

/// Reduces a page tree for prompting.
///
/// Invisible subtrees go first, then decorative nodes (no text, no
/// content_desc, not interactive, nothing retained below). While the tree is
/// still over budget, leaves are removed one at a time: the deepest
/// non-interactive leaf (ties: latest in pre-order), falling back to the
/// deepest leaf of any kind. The removal order does not depend on the budget,
/// so a larger budget always keeps a superset. The root is never removed.
/// Retained nodes keep their original node_path.
[[nodiscard]] Widget prune_dom(const GuiPage& page, std::size_t budget = default_prune_budget);

struct AnnotatedPage
{
    GuiPage base;
    Screenshot overlay;
    std::map<int, NodePath> index_map; // labels 1..N in pre-order
};

/// Labels every interactive node of the pruned tree. PPM screenshots get a
/// numbered box per label; other formats are passed through unchanged.
[[nodiscard]] AnnotatedPage annotate_screenshot(const GuiPage& page, const Widget& pruned);

/// One line per interactive widget: "label N: <role> '<text>' at <region>".
[[nodiscard]] std::string describe_page(const Widget& pruned);

/// Indented listing of the pruned tree with labels where present.
[[nodiscard]] std::string serialize_dom(const Widget& pruned);

/// Short role noun for a widget ("button", "text field", ...).
[[nodiscard]] std::string widget_role(const Widget& w);

/// Text when present, otherwise content_desc.
[[nodiscard]] const std::string& widget_label_text(const Widget& w);

/// Screen region such as "middle-center", relative to the root bounds.
[[nodiscard]] std::string screen_region(const Widget& root, const Widget& w);

} // namespace guimig
