//! Minimal owned XML element tree and a deterministic writer.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct XmlElement {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    /// Character data of a leaf element. Mixed content is not modelled.
    pub text: Option<String>,
    pub children: Vec<XmlElement>,
}

impl XmlElement {
    pub fn new(name: impl Into<String>) -> Self {
        XmlElement {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn with_text(name: impl Into<String>, text: impl Into<String>) -> Self {
        XmlElement {
            name: name.into(),
            text: Some(text.into()),
            ..Default::default()
        }
    }

    pub fn attr(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.attrs.push((key.into(), value.into()));
        self
    }

    pub fn child(mut self, c: XmlElement) -> Self {
        self.children.push(c);
        self
    }

    pub fn push(&mut self, c: XmlElement) {
        self.children.push(c);
    }

    pub fn get_attr(&self, key: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn find(&self, name: &str) -> Option<&XmlElement> {
        self.children.iter().find(|c| c.name == name)
    }

    pub fn find_all<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a XmlElement> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }

    pub fn find_mut(&mut self, name: &str) -> Option<&mut XmlElement> {
        self.children.iter_mut().find(|c| c.name == name)
    }

    /// Number of elements in this subtree, including self.
    pub fn element_count(&self) -> usize {
        1 + self.children.iter().map(XmlElement::element_count).sum::<usize>()
    }

    /// Build from a parsed DOM node, keeping attributes accepted by `keep_attr`.
    pub fn from_node(node: roxmltree::Node<'_, '_>, keep_attr: &dyn Fn(&str) -> bool) -> Self {
        let mut el = XmlElement::new(node.tag_name().name());
        for a in node.attributes() {
            if keep_attr(a.name()) {
                el.attrs.push((a.name().to_string(), a.value().to_string()));
            }
        }
        let mut has_elements = false;
        for c in node.children().filter(|c| c.is_element()) {
            has_elements = true;
            el.children.push(XmlElement::from_node(c, keep_attr));
        }
        if !has_elements {
            let text: String = node
                .children()
                .filter(|c| c.is_text())
                .filter_map(|c| c.text())
                .collect();
            let text = text.trim();
            if !text.is_empty() {
                el.text = Some(text.to_string());
            }
        }
        el
    }

    pub fn write_to(&self, out: &mut String, depth: usize) {
        for _ in 0..depth {
            out.push_str("  ");
        }
        out.push('<');
        out.push_str(&self.name);
        for (k, v) in &self.attrs {
            let _ = write!(out, " {}=\"{}\"", k, escape(v, true));
        }
        if self.children.is_empty() {
            match &self.text {
                Some(t) => {
                    let _ = writeln!(out, ">{}</{}>", escape(t, false), self.name);
                }
                None => out.push_str("/>\n"),
            }
            return;
        }
        out.push_str(">\n");
        for c in &self.children {
            c.write_to(out, depth + 1);
        }
        for _ in 0..depth {
            out.push_str("  ");
        }
        let _ = writeln!(out, "</{}>", self.name);
    }
}

fn escape(s: &str, attr: bool) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attr => out.push_str("&quot;"),
            _ => out.push(ch),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_and_escapes() {
        let el = XmlElement::new("a")
            .attr("k", "x\"y")
            .child(XmlElement::with_text("b", "1 < 2 & 3"))
            .child(XmlElement::new("c"));
        let mut s = String::new();
        el.write_to(&mut s, 0);
        assert_eq!(
            s,
            "<a k=\"x&quot;y\">\n  <b>1 &lt; 2 &amp; 3</b>\n  <c/>\n</a>\n"
        );
        let doc = roxmltree::Document::parse(&s).unwrap();
        let back = XmlElement::from_node(doc.root_element(), &|_| true);
        assert_eq!(back, el);
        assert_eq!(back.element_count(), 3);
    }
}
