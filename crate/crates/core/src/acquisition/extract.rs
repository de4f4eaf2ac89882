//! Boilerplate removal: HTML in, visible body text out.

use ego_tree::NodeRef;
use scraper::{Html, Node};

/// Subtrees that never contribute text.
const STRIPPED: &[&str] = &[
    "script", "style", "nav", "header", "footer", "aside", "form", "noscript", "template", "head", "svg", "iframe",
    "button", "select", "textarea",
];

const BLOCKS: &[&str] = &[
    "address",
    "article",
    "blockquote",
    "body",
    "caption",
    "dd",
    "details",
    "dialog",
    "div",
    "dl",
    "dt",
    "fieldset",
    "figcaption",
    "figure",
    "h1",
    "h2",
    "h3",
    "h4",
    "h5",
    "h6",
    "hr",
    "html",
    "legend",
    "li",
    "main",
    "ol",
    "p",
    "pre",
    "section",
    "summary",
    "table",
    "tbody",
    "td",
    "tfoot",
    "th",
    "thead",
    "tr",
    "ul",
];

/// Visible text of `page_html` with chrome subtrees removed.
///
/// Block elements become line breaks, runs of whitespace inside a line
/// collapse to one space, and blank lines are dropped, so the output is a
/// sequence of non-empty trimmed lines joined by `\n`.
pub fn extract_text(page_html: &str) -> String {
    let document = Html::parse_document(page_html);
    let mut lines = LineBuffer::default();
    walk(document.tree.root(), &mut lines);
    lines.finish()
}

/// Number of whitespace-separated tokens.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

fn walk(node: NodeRef<'_, Node>, out: &mut LineBuffer) {
    match node.value() {
        Node::Text(text) => out.push(text),
        Node::Element(el) => {
            let name = el.name();
            if STRIPPED.contains(&name) || el.attr("hidden").is_some() || aria_hidden(el) {
                return;
            }
            if name == "br" {
                out.break_line();
                return;
            }
            let block = BLOCKS.contains(&name);
            if block {
                out.break_line();
            }
            for child in node.children() {
                walk(child, out);
            }
            if block {
                out.break_line();
            }
        }
        Node::Document | Node::Fragment => {
            for child in node.children() {
                walk(child, out);
            }
        }
        _ => {}
    }
}

fn aria_hidden(el: &scraper::node::Element) -> bool {
    el.attr("aria-hidden").is_some_and(|v| v.eq_ignore_ascii_case("true"))
}

#[derive(Default)]
struct LineBuffer {
    current: String,
    lines: Vec<String>,
}

impl LineBuffer {
    fn push(&mut self, text: &str) {
        self.current.push_str(text);
    }

    fn break_line(&mut self) {
        let line = self.current.split_whitespace().collect::<Vec<_>>().join(" ");
        if !line.is_empty() {
            self.lines.push(line);
        }
        self.current.clear();
    }

    fn finish(mut self) -> String {
        self.break_line();
        self.lines.join("\n")
    }
}
