//! N-Triples reader and writer.

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::dictionary::Term;
use crate::storage::{StorageError, TripleStore};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Storage(#[from] StorageError),
}

/// Parses one line. Returns `None` for blank and comment lines.
pub fn parse_line(text: &str) -> Result<Option<(Term, Term, Term)>, String> {
    let mut p = LineParser {
        chars: text.chars().collect(),
        pos: 0,
    };
    p.ws();
    if p.done() || p.peek() == Some('#') {
        return Ok(None);
    }
    let s = p.term()?;
    if matches!(s, Term::Literal { .. }) {
        return Err("subject must be an IRI or blank node".into());
    }
    p.ws();
    let pred = p.term()?;
    if !matches!(pred, Term::Iri(_)) {
        return Err("predicate must be an IRI".into());
    }
    p.ws();
    let o = p.term()?;
    p.ws();
    if p.peek() != Some('.') {
        return Err("expected '.' at end of triple".into());
    }
    p.pos += 1;
    p.ws();
    if !p.done() && p.peek() != Some('#') {
        return Err(format!("unexpected text after '.': {}", p.rest()));
    }
    Ok(Some((s, pred, o)))
}

struct LineParser {
    chars: Vec<char>,
    pos: usize,
}

impl LineParser {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn done(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn rest(&self) -> String {
        self.chars[self.pos..].iter().collect()
    }

    fn ws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t' | '\r')) {
            self.pos += 1;
        }
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> String {
        let start = self.pos;
        while self.peek().is_some_and(&f) {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn iri(&mut self) -> Result<String, String> {
        self.pos += 1;
        let s = self.take_while(|c| c != '>' && !c.is_whitespace());
        if self.peek() != Some('>') {
            return Err("unterminated IRI".into());
        }
        self.pos += 1;
        if s.is_empty() {
            return Err("empty IRI".into());
        }
        Ok(s)
    }

    fn term(&mut self) -> Result<Term, String> {
        match self.peek() {
            Some('<') => Ok(Term::iri(self.iri()?)),
            Some('_') => {
                if self.chars.get(self.pos + 1) != Some(&':') {
                    return Err("expected '_:' for a blank node".into());
                }
                self.pos += 2;
                let label = self.take_while(|c| c.is_alphanumeric() || c == '_' || c == '-' || c == '.');
                let label = label.trim_end_matches('.').to_string();
                self.pos -= self.chars[..self.pos].iter().rev().take_while(|c| **c == '.').count();
                if label.is_empty() {
                    return Err("empty blank node label".into());
                }
                Ok(Term::blank(label))
            }
            Some('"') => {
                self.pos += 1;
                let mut lex = String::new();
                loop {
                    let c = self.peek().ok_or("unterminated literal")?;
                    self.pos += 1;
                    match c {
                        '"' => break,
                        '\\' => {
                            let e = self.peek().ok_or("dangling escape")?;
                            self.pos += 1;
                            match e {
                                't' => lex.push('\t'),
                                'n' => lex.push('\n'),
                                'r' => lex.push('\r'),
                                'b' => lex.push('\u{8}'),
                                'f' => lex.push('\u{c}'),
                                '"' | '\\' | '\'' => lex.push(e),
                                'u' | 'U' => {
                                    let n = if e == 'u' { 4 } else { 8 };
                                    let hex: String = self.chars.get(self.pos..self.pos + n).ok_or("short \\u escape")?.iter().collect();
                                    self.pos += n;
                                    let v = u32::from_str_radix(&hex, 16).map_err(|_| format!("bad escape \\{e}{hex}"))?;
                                    lex.push(char::from_u32(v).ok_or(format!("bad code point {v:#x}"))?);
                                }
                                other => return Err(format!("unknown escape \\{other}")),
                            }
                        }
                        c => lex.push(c),
                    }
                }
                match self.peek() {
                    Some('@') => {
                        self.pos += 1;
                        let tag = self.take_while(|c| c.is_alphanumeric() || c == '-');
                        if tag.is_empty() {
                            return Err("empty language tag".into());
                        }
                        Ok(Term::lang(lex, tag))
                    }
                    Some('^') => {
                        if self.chars.get(self.pos + 1) != Some(&'^') || self.chars.get(self.pos + 2) != Some(&'<') {
                            return Err("expected ^^<datatype>".into());
                        }
                        self.pos += 2;
                        Ok(Term::typed(lex, self.iri()?))
                    }
                    _ => Ok(Term::plain(lex)),
                }
            }
            Some(c) => Err(format!("unexpected character '{c}'")),
            None => Err("unexpected end of line".into()),
        }
    }
}

/// Reads every triple; on any error nothing is returned.
pub fn parse_document(reader: impl BufRead) -> Result<Vec<(Term, Term, Term)>, LoadError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        match parse_line(&line) {
            Ok(Some(t)) => out.push(t),
            Ok(None) => {}
            Err(message) => return Err(LoadError::Syntax { line: i + 1, message }),
        }
    }
    Ok(out)
}

/// Parses and loads into a new frozen store.
pub fn load(reader: impl BufRead) -> Result<TripleStore, LoadError> {
    let triples = parse_document(reader)?;
    let mut st = TripleStore::new();
    for (s, p, o) in &triples {
        st.insert_terms(s, p, o)?;
    }
    st.freeze();
    Ok(st)
}

/// Writes every stored triple in SPO order.
pub fn dump(store: &TripleStore, mut w: impl Write) -> std::io::Result<()> {
    let d = store.dictionary();
    for t in store.triples() {
        let term = |id| d.decode(id).expect("stored ids decode");
        writeln!(w, "{} {} {} .", term(t.s), term(t.p), term(t.o))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::XSD_INTEGER;
    use std::collections::HashSet;

    const ALICE: &str = "<http://example.org/Alice> <http://example.org/knows> <http://example.org/Bob> .
<http://example.org/Alice> <http://example.org/knows> <http://example.org/Charlie> .
<http://example.org/Bob> <http://example.org/worksAt> <http://example.org/ACME> .
";

    #[test]
    fn loads_example_graph() {
        let st = load(ALICE.as_bytes()).unwrap();
        assert_eq!(st.len(), 3);
    }

    #[test]
    fn empty_and_comments() {
        assert_eq!(load("".as_bytes()).unwrap().len(), 0);
        assert_eq!(load("# nothing\n\n   \n".as_bytes()).unwrap().len(), 0);
    }

    #[test]
    fn literal_forms() {
        let (_, _, o) = parse_line(r#"_:b1 <p> "a\"bé"@en-GB . # trailing"#).unwrap().unwrap();
        assert_eq!(o, Term::lang("a\"bé", "en-GB"));
        let (s, _, o) = parse_line(&format!("_:x <p> \"42\"^^<{XSD_INTEGER}>.")).unwrap().unwrap();
        assert_eq!(s, Term::blank("x"));
        assert_eq!(o, Term::integer(42));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = format!("{ALICE}<a> \"lit\" <b> .\n");
        match load(bad.as_bytes()) {
            Err(LoadError::Syntax { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(parse_line("<a> <b> <c>").is_err());
        assert!(parse_line("\"x\" <b> <c> .").is_err());
    }

    #[test]
    fn dump_round_trip() {
        let src = format!("{ALICE}_:n <http://example.org/name> \"tab\\there\"@en .\n<http://x> <http://y> \"7\"^^<{XSD_INTEGER}> .\n");
        let st = load(src.as_bytes()).unwrap();
        let mut out = Vec::new();
        dump(&st, &mut out).unwrap();
        let a: HashSet<_> = parse_document(src.as_bytes()).unwrap().into_iter().collect();
        let b: HashSet<_> = parse_document(out.as_slice()).unwrap().into_iter().collect();
        assert_eq!(a, b);
    }
}
