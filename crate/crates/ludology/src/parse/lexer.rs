//! Tokenizer for the description language.
//!
//! The language is line-oriented: declarations end at a newline. Names may
//! contain template holes (`claim_{p}_{n}`), which the lexer keeps as
//! separate brace tokens; the parser reassembles adjacent fragments using
//! byte offsets.

use crate::parse::{Diagnostic, Pos};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Quoted(String),
    Newline,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Colon,
    DoubleColon,
    Semi,
    Comma,
    At,
    Tilde,
    Star,
    Bang,
    Amp,
    Pipe,
    Arrow,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Dash,
    Slash,
    DotDot,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
    /// Byte offsets into the source, used for adjacency checks when gluing
    /// name fragments.
    pub start: usize,
    pub end: usize,
}

fn ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

pub fn lex(text: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut out: Vec<Token> = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.char_indices().peekable();

    macro_rules! push {
        ($tok:expr, $start:expr, $end:expr, $pos:expr) => {
            out.push(Token { tok: $tok, pos: $pos, start: $start, end: $end })
        };
    }

    while let Some((i, c)) = chars.next() {
        let pos = Pos { line, col };
        let advance = |col: &mut usize, n: usize| *col += n;
        match c {
            '\n' => {
                // Collapse runs of newlines.
                if !matches!(out.last().map(|t| &t.tok), Some(Tok::Newline) | None) {
                    push!(Tok::Newline, i, i + 1, pos);
                }
                line += 1;
                col = 1;
                continue;
            }
            ' ' | '\t' | '\r' => {
                advance(&mut col, 1);
                continue;
            }
            '#' => {
                while let Some(&(_, c)) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
                continue;
            }
            '"' => {
                let mut s = String::new();
                let mut closed = false;
                let mut consumed = 1;
                for (_, c) in chars.by_ref() {
                    consumed += 1;
                    if c == '"' {
                        closed = true;
                        break;
                    }
                    if c == '\n' {
                        break;
                    }
                    s.push(c);
                }
                if !closed {
                    return Err(Diagnostic::error(pos, "unterminated string literal"));
                }
                push!(Tok::Quoted(s), i, i + consumed, pos);
                advance(&mut col, consumed);
                continue;
            }
            _ => {}
        }

        if ident_char(c) {
            let start = i;
            let mut word = String::new();
            word.push(c);
            let mut end = i + c.len_utf8();
            while let Some(&(j, c2)) = chars.peek() {
                if ident_char(c2) {
                    word.push(c2);
                    end = j + c2.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            let n = word.chars().count();
            let tok = if word.chars().all(|c| c.is_ascii_digit()) {
                match word.parse::<i64>() {
                    Ok(v) => Tok::Int(v),
                    Err(_) => return Err(Diagnostic::error(pos, format!("integer '{word}' out of range"))),
                }
            } else {
                Tok::Ident(word)
            };
            push!(tok, start, end, pos);
            col += n;
            continue;
        }

        let two = |chars: &mut std::iter::Peekable<std::str::CharIndices>, want: char| -> bool {
            if let Some(&(_, c2)) = chars.peek() {
                if c2 == want {
                    chars.next();
                    return true;
                }
            }
            false
        };

        let (tok, len) = match c {
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '[' => (Tok::LBracket, 1),
            ']' => (Tok::RBracket, 1),
            '{' => (Tok::LBrace, 1),
            '}' => (Tok::RBrace, 1),
            ';' => (Tok::Semi, 1),
            ',' => (Tok::Comma, 1),
            '@' => (Tok::At, 1),
            '~' => (Tok::Tilde, 1),
            '*' => (Tok::Star, 1),
            '&' => (Tok::Amp, 1),
            '|' => (Tok::Pipe, 1),
            '+' => (Tok::Plus, 1),
            '/' => (Tok::Slash, 1),
            ':' => {
                if two(&mut chars, ':') {
                    (Tok::DoubleColon, 2)
                } else {
                    (Tok::Colon, 1)
                }
            }
            '-' => {
                if two(&mut chars, '>') {
                    (Tok::Arrow, 2)
                } else {
                    (Tok::Dash, 1)
                }
            }
            '=' => (Tok::Eq, 1),
            '!' => {
                if two(&mut chars, '=') {
                    (Tok::Ne, 2)
                } else {
                    (Tok::Bang, 1)
                }
            }
            '<' => {
                if two(&mut chars, '=') {
                    (Tok::Le, 2)
                } else {
                    (Tok::Lt, 1)
                }
            }
            '>' => {
                if two(&mut chars, '=') {
                    (Tok::Ge, 2)
                } else {
                    (Tok::Gt, 1)
                }
            }
            '.' => {
                if two(&mut chars, '.') {
                    (Tok::DotDot, 2)
                } else {
                    return Err(Diagnostic::error(pos, "unexpected '.'"));
                }
            }
            other => {
                return Err(Diagnostic::error(pos, format!("unexpected character '{other}'")));
            }
        };
        push!(tok, i, i + len, pos);
        col += len;
    }

    if !matches!(out.last().map(|t| &t.tok), Some(Tok::Newline) | None) {
        let end = text.len();
        push!(Tok::Newline, end, end, Pos { line, col });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<Tok> {
        lex(text).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn words_and_numbers() {
        assert_eq!(
            kinds("track 1L : 0 4"),
            vec![
                Tok::Ident("track".into()),
                Tok::Ident("1L".into()),
                Tok::Colon,
                Tok::Int(0),
                Tok::Int(4),
                Tok::Newline
            ]
        );
    }

    #[test]
    fn operators() {
        assert_eq!(
            kinds("a -> b != c .. ::"),
            vec![
                Tok::Ident("a".into()),
                Tok::Arrow,
                Tok::Ident("b".into()),
                Tok::Ne,
                Tok::Ident("c".into()),
                Tok::DotDot,
                Tok::DoubleColon,
                Tok::Newline
            ]
        );
    }

    #[test]
    fn comments_and_strings() {
        assert_eq!(
            kinds("omega x -> \"P2 win\" # trailing"),
            vec![
                Tok::Ident("omega".into()),
                Tok::Ident("x".into()),
                Tok::Arrow,
                Tok::Quoted("P2 win".into()),
                Tok::Newline
            ]
        );
    }

    #[test]
    fn template_fragments_are_adjacent() {
        let toks = lex("claim_{p}_{n}").unwrap();
        assert_eq!(toks[0].end, toks[1].start); // "claim_" then "{"
        assert_eq!(toks.len(), 9); // claim_ { p } _ { n } \n
    }

    #[test]
    fn reports_bad_character() {
        assert!(lex("track $x").is_err());
    }
}
