//! Tokenizer for `.alg` programs and the decomposition fragments of `.kb` files.

use std::fmt;

use super::ast::Span;
use super::DslError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Number(f64),
    // keywords
    Input,
    Scalar,
    Vector,
    Collection,
    Subset,
    Output,
    For,
    In,
    Where,
    And,
    If,
    Else,
    Sum,
    Product,
    Over,
    Of,
    // punctuation
    Eq,
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Arrow,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
}

impl TokenKind {
    fn keyword(word: &str) -> Option<TokenKind> {
        Some(match word {
            "input" => TokenKind::Input,
            "scalar" => TokenKind::Scalar,
            "vector" => TokenKind::Vector,
            "collection" => TokenKind::Collection,
            "subset" => TokenKind::Subset,
            "output" => TokenKind::Output,
            "for" => TokenKind::For,
            "in" => TokenKind::In,
            "where" => TokenKind::Where,
            "and" => TokenKind::And,
            "if" => TokenKind::If,
            "else" => TokenKind::Else,
            "sum" => TokenKind::Sum,
            "product" => TokenKind::Product,
            "over" => TokenKind::Over,
            "of" => TokenKind::Of,
            _ => return None,
        })
    }

    /// Short name used in "expected ..." parse messages.
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(name) => format!("identifier `{name}`"),
            TokenKind::Number(n) => format!("number `{n}`"),
            other => format!("`{other}`"),
        }
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TokenKind::Ident(name) => return f.write_str(name),
            TokenKind::Number(n) => return write!(f, "{n}"),
            TokenKind::Input => "input",
            TokenKind::Scalar => "scalar",
            TokenKind::Vector => "vector",
            TokenKind::Collection => "collection",
            TokenKind::Subset => "subset",
            TokenKind::Output => "output",
            TokenKind::For => "for",
            TokenKind::In => "in",
            TokenKind::Where => "where",
            TokenKind::And => "and",
            TokenKind::If => "if",
            TokenKind::Else => "else",
            TokenKind::Sum => "sum",
            TokenKind::Product => "product",
            TokenKind::Over => "over",
            TokenKind::Of => "of",
            TokenKind::Eq => "=",
            TokenKind::Plus => "+",
            TokenKind::Minus => "-",
            TokenKind::Star => "*",
            TokenKind::Slash => "/",
            TokenKind::LParen => "(",
            TokenKind::RParen => ")",
            TokenKind::LBracket => "[",
            TokenKind::RBracket => "]",
            TokenKind::LBrace => "{",
            TokenKind::RBrace => "}",
            TokenKind::Comma => ",",
            TokenKind::Arrow => "->",
            TokenKind::Lt => "<",
            TokenKind::Le => "<=",
            TokenKind::Gt => ">",
            TokenKind::Ge => ">=",
            TokenKind::EqEq => "==",
            TokenKind::Ne => "!=",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

/// Splits `text` into tokens. `#` starts a comment running to the end of the line.
///
/// Fails on an illegal character, and on input that holds nothing but
/// whitespace and comments.
pub fn tokenize(text: &str) -> Result<Vec<Token>, DslError> {
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();
    let mut line = 1u32;
    let mut col = 1u32;

    while let Some(&(start, c)) = chars.peek() {
        let span = Span::new(line, col);
        if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            col += 1;
            continue;
        }
        if c == '#' {
            while let Some(&(_, c)) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
                col += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut end = start;
            while let Some(&(i, c)) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    end = i + c.len_utf8();
                    chars.next();
                    col += 1;
                } else {
                    break;
                }
            }
            let word = &text[start..end];
            let kind = TokenKind::keyword(word).unwrap_or_else(|| TokenKind::Ident(word.to_string()));
            tokens.push(Token { kind, span });
            continue;
        }
        if c.is_ascii_digit() {
            let mut end = start;
            let mut seen_dot = false;
            while let Some(&(i, c)) = chars.peek() {
                if c.is_ascii_digit() || (c == '.' && !seen_dot) {
                    seen_dot |= c == '.';
                    end = i + 1;
                    chars.next();
                    col += 1;
                } else {
                    break;
                }
            }
            let literal = &text[start..end];
            let value = literal
                .parse::<f64>()
                .map_err(|_| DslError::Lex { span, message: format!("malformed number `{literal}`") })?;
            tokens.push(Token { kind: TokenKind::Number(value), span });
            continue;
        }

        chars.next();
        col += 1;
        let next = chars.peek().map(|&(_, c)| c);
        let mut two = |kind: TokenKind, chars: &mut std::iter::Peekable<std::str::CharIndices<'_>>| {
            chars.next();
            col += 1;
            kind
        };
        let kind = match (c, next) {
            ('-', Some('>')) => two(TokenKind::Arrow, &mut chars),
            ('<', Some('=')) => two(TokenKind::Le, &mut chars),
            ('>', Some('=')) => two(TokenKind::Ge, &mut chars),
            ('=', Some('=')) => two(TokenKind::EqEq, &mut chars),
            ('!', Some('=')) => two(TokenKind::Ne, &mut chars),
            ('=', _) => TokenKind::Eq,
            ('+', _) => TokenKind::Plus,
            ('-', _) => TokenKind::Minus,
            ('*', _) => TokenKind::Star,
            ('/', _) => TokenKind::Slash,
            ('(', _) => TokenKind::LParen,
            (')', _) => TokenKind::RParen,
            ('[', _) => TokenKind::LBracket,
            (']', _) => TokenKind::RBracket,
            ('{', _) => TokenKind::LBrace,
            ('}', _) => TokenKind::RBrace,
            (',', _) => TokenKind::Comma,
            ('<', _) => TokenKind::Lt,
            ('>', _) => TokenKind::Gt,
            _ => {
                return Err(DslError::Lex { span, message: format!("illegal character `{c}`") });
            }
        };
        tokens.push(Token { kind, span });
    }

    if tokens.is_empty() {
        return Err(DslError::Lex { span: Span::new(1, 1), message: "program is empty".into() });
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use TokenKind::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn simple_assignment() {
        assert_eq!(
            kinds("x = a + b"),
            vec![Ident("x".into()), Eq, Ident("a".into()), Plus, Ident("b".into())]
        );
    }

    #[test]
    fn empty_after_comments_is_an_error() {
        assert!(matches!(tokenize(""), Err(DslError::Lex { .. })));
        assert!(matches!(tokenize("  # only a comment\n\n"), Err(DslError::Lex { .. })));
    }

    #[test]
    fn accumulation_keywords() {
        let k = kinds("sum over i in R of r[i]");
        assert_eq!(&k[..5], &[Sum, Over, Ident("i".into()), In, Ident("R".into())]);
        assert_eq!(k[5], Of);
    }

    #[test]
    fn positions_track_lines_and_columns() {
        let toks = tokenize("# header\n  x = 1\ny >= 2.5").unwrap();
        assert_eq!(toks[0].span, Span::new(2, 3));
        assert_eq!(toks[3].span, Span::new(3, 1));
        assert_eq!(toks[4].kind, Ge);
        assert_eq!(toks[5].kind, Number(2.5));
    }

    #[test]
    fn illegal_character_reports_position() {
        match tokenize("x = 1\ny = $") {
            Err(DslError::Lex { span, .. }) => assert_eq!((span.line, span.column), (2, 5)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
