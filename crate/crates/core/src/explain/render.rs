//! Highlighted renderings of an explanation over its document.

use super::Explanation;
use crate::corpus::Document;

const ANSI_ON: &str = "\x1b[1;31m";
const ANSI_DIM: &str = "\x1b[2m";
const ANSI_RESET: &str = "\x1b[0m";

fn included_mask(doc: &Document, expl: &Explanation) -> Vec<bool> {
    let mut mask = vec![false; doc.n_tokens()];
    for span in expl.spans() {
        for m in mask.iter_mut().skip(span.start).take(span.length) {
            *m = true;
        }
    }
    mask
}

/// Runs of consecutive tokens sharing the same inclusion flag.
fn runs(doc: &Document, expl: &Explanation) -> Vec<(bool, String)> {
    let mask = included_mask(doc, expl);
    let mut out: Vec<(bool, Vec<&str>)> = Vec::new();
    for (tok, inc) in doc.display_tokens.iter().zip(mask) {
        match out.last_mut() {
            Some((flag, toks)) if *flag == inc => toks.push(tok),
            _ => out.push((inc, vec![tok])),
        }
    }
    out.into_iter().map(|(f, toks)| (f, toks.join(" "))).collect()
}

/// Included phrases in bold red, the rest dimmed.
pub fn render_ansi(doc: &Document, expl: &Explanation) -> String {
    runs(doc, expl)
        .into_iter()
        .map(|(inc, text)| {
            let style = if inc { ANSI_ON } else { ANSI_DIM };
            format!("{style}{text}{ANSI_RESET}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn escape_html(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Included phrases wrapped in `<mark>`.
pub fn render_html(doc: &Document, expl: &Explanation) -> String {
    runs(doc, expl)
        .into_iter()
        .map(|(inc, text)| {
            let text = escape_html(&text);
            if inc {
                format!("<mark>{text}</mark>")
            } else {
                format!("<span class=\"ctx\">{text}</span>")
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::PhraseSpan;

    #[test]
    fn html_marks_and_escapes() {
        let doc = Document::new("d", "I <3 my cat & dog so much", 1, "x");
        let e = Explanation::new(8, vec![PhraseSpan::new(1, 2), PhraseSpan::new(6, 2)]).unwrap();
        assert_eq!(
            render_html(&doc, &e),
            "<span class=\"ctx\">I</span> <mark>&lt;3 my</mark> \
             <span class=\"ctx\">cat &amp; dog</span> <mark>so much</mark>"
        );
    }

    #[test]
    fn ansi_preserves_tokens() {
        let doc = Document::new("d", "one two three four", 1, "x");
        let e = Explanation::new(4, vec![PhraseSpan::new(1, 2)]).unwrap();
        let out = render_ansi(&doc, &e);
        let plain = out
            .replace(ANSI_ON, "")
            .replace(ANSI_DIM, "")
            .replace(ANSI_RESET, "");
        assert_eq!(plain, "one two three four");
        assert!(out.contains(&format!("{ANSI_ON}two three{ANSI_RESET}")));
    }
}
