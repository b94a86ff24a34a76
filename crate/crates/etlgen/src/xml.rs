//! Thin helpers over roxmltree shared by the three document parsers.
//!
//! All parsers reject unknown elements and attributes so typos surface
//! as syntax errors instead of silently ignored input.

use roxmltree::{Document, Node, TextPos};

/// Line/column position of a syntax problem, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub line: u32,
    pub col: u32,
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XmlError {
    pub at: Location,
    pub message: String,
}

impl std::fmt::Display for XmlError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} at {}", self.message, self.at)
    }
}

fn loc(pos: TextPos) -> Location {
    Location { line: pos.row, col: pos.col }
}

pub fn node_loc(doc: &Document, node: Node) -> Location {
    loc(doc.text_pos_at(node.range().start))
}

pub fn parse(text: &str) -> Result<Document<'_>, XmlError> {
    Document::parse(text).map_err(|e| XmlError {
        at: loc(e.pos()),
        message: format!("malformed document: {e}"),
    })
}

fn err(doc: &Document, node: Node, message: String) -> XmlError {
    XmlError { at: node_loc(doc, node), message }
}

/// The document's root element, which must carry the expected name.
pub fn root<'a, 'd>(doc: &'a Document<'d>, name: &str) -> Result<Node<'a, 'd>, XmlError> {
    let root = doc.root_element();
    if root.tag_name().name() != name {
        return Err(err(
            doc,
            root,
            format!("expected root element `{name}`, found `{}`", root.tag_name().name()),
        ));
    }
    Ok(root)
}

/// Element children of `node`; anything but whitespace text, comments
/// and elements named in `allowed` is rejected.
pub fn children<'a, 'd>(
    doc: &Document<'d>,
    node: Node<'a, 'd>,
    allowed: &[&str],
) -> Result<Vec<Node<'a, 'd>>, XmlError> {
    let mut out = Vec::new();
    for child in node.children() {
        if child.is_element() {
            let name = child.tag_name().name();
            if !allowed.contains(&name) {
                return Err(err(doc, child, format!("unexpected element `{name}`")));
            }
            out.push(child);
        } else if child.is_text() {
            if !child.text().unwrap_or("").trim().is_empty() {
                return Err(err(doc, child, "unexpected text content".into()));
            }
        } else if !child.is_comment() {
            return Err(err(doc, child, "unexpected node".into()));
        }
    }
    Ok(out)
}

/// Reject attributes outside `allowed`.
pub fn check_attrs(doc: &Document, node: Node, allowed: &[&str]) -> Result<(), XmlError> {
    for attr in node.attributes() {
        if !allowed.contains(&attr.name()) {
            return Err(err(
                doc,
                node,
                format!("unknown attribute `{}` on `{}`", attr.name(), node.tag_name().name()),
            ));
        }
    }
    Ok(())
}

pub fn require_attr<'a>(doc: &Document, node: Node<'a, '_>, name: &str) -> Result<&'a str, XmlError> {
    node.attribute(name)
        .ok_or_else(|| err(doc, node, format!("missing attribute `{name}` on `{}`", node.tag_name().name())))
}

/// Escape an attribute value for the document writers.
pub fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            other => out.push(other),
        }
    }
    out
}
