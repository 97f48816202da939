use super::SourceError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    // numeric literal, raw text preserved (also covers fractions like 1/3)
    Number(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Semi,
    Comma,
    Dot,
    Colon,
    Bar,
    Amp,
    Tilde,
    Plus,
    Arrow,     // ->
    FatArrow,  // =>
    Ge,        // >=
    Eq,        // =
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{}`", s),
            Tok::Number(s) => format!("number `{}`", s),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Tilde => "`~`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::FatArrow => "`=>`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub column: u32,
}

pub fn tokenize(input: &str) -> Result<Vec<Token>, SourceError> {
    let mut out = Vec::new();
    let mut line: u32 = 1;
    let mut column: u32 = 1;
    let mut chars = input.chars().peekable();

    macro_rules! bump {
        () => {{
            let c = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
            c
        }};
    }

    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, column);
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump!();
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump!();
                }
            }
            '(' => {
                bump!();
                out.push(Token { tok: Tok::LParen, line: tl, column: tc });
            }
            ')' => {
                bump!();
                out.push(Token { tok: Tok::RParen, line: tl, column: tc });
            }
            '{' => {
                bump!();
                out.push(Token { tok: Tok::LBrace, line: tl, column: tc });
            }
            '}' => {
                bump!();
                out.push(Token { tok: Tok::RBrace, line: tl, column: tc });
            }
            ';' => {
                bump!();
                out.push(Token { tok: Tok::Semi, line: tl, column: tc });
            }
            ',' => {
                bump!();
                out.push(Token { tok: Tok::Comma, line: tl, column: tc });
            }
            '.' => {
                bump!();
                out.push(Token { tok: Tok::Dot, line: tl, column: tc });
            }
            ':' => {
                bump!();
                out.push(Token { tok: Tok::Colon, line: tl, column: tc });
            }
            '|' => {
                bump!();
                out.push(Token { tok: Tok::Bar, line: tl, column: tc });
            }
            '&' => {
                bump!();
                out.push(Token { tok: Tok::Amp, line: tl, column: tc });
            }
            '~' => {
                bump!();
                out.push(Token { tok: Tok::Tilde, line: tl, column: tc });
            }
            '+' => {
                bump!();
                out.push(Token { tok: Tok::Plus, line: tl, column: tc });
            }
            '-' => {
                bump!();
                match chars.peek() {
                    Some('>') => {
                        bump!();
                        out.push(Token { tok: Tok::Arrow, line: tl, column: tc });
                    }
                    Some(d) if d.is_ascii_digit() => {
                        let text = lex_number(&mut chars, &mut line, &mut column, true);
                        out.push(Token { tok: Tok::Number(text), line: tl, column: tc });
                    }
                    _ => {
                        return Err(SourceError::new(tl, tc, "expected `->` or a number after `-`"));
                    }
                }
            }
            '>' => {
                bump!();
                if chars.peek() == Some(&'=') {
                    bump!();
                    out.push(Token { tok: Tok::Ge, line: tl, column: tc });
                } else {
                    return Err(SourceError::new(tl, tc, "expected `>=`"));
                }
            }
            '=' => {
                bump!();
                if chars.peek() == Some(&'>') {
                    bump!();
                    out.push(Token { tok: Tok::FatArrow, line: tl, column: tc });
                } else {
                    out.push(Token { tok: Tok::Eq, line: tl, column: tc });
                }
            }
            c if c.is_ascii_digit() => {
                let text = lex_number(&mut chars, &mut line, &mut column, false);
                out.push(Token { tok: Tok::Number(text), line: tl, column: tc });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut text = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        text.push(bump!());
                    } else {
                        break;
                    }
                }
                out.push(Token { tok: Tok::Ident(text), line: tl, column: tc });
            }
            other => {
                return Err(SourceError::new(tl, tc, format!("unexpected character `{}`", other)));
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, column });
    Ok(out)
}

fn lex_number(
    chars: &mut std::iter::Peekable<std::str::Chars<'_>>,
    line: &mut u32,
    column: &mut u32,
    negative: bool,
) -> String {
    let mut text = String::new();
    if negative {
        text.push('-');
    }
    let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars<'_>>| {
        let c = chars.next().unwrap();
        if c == '\n' {
            *line += 1;
            *column = 1;
        } else {
            *column += 1;
        }
        c
    };
    while let Some(&c) = chars.peek() {
        if c.is_ascii_digit() {
            text.push(bump(chars));
        } else {
            break;
        }
    }
    if chars.peek() == Some(&'.') {
        // lookahead: a dot only belongs to the number if a digit follows
        let mut probe = chars.clone();
        probe.next();
        if probe.peek().is_some_and(|c| c.is_ascii_digit()) {
            text.push(bump(chars));
            while let Some(&c) = chars.peek() {
                if c.is_ascii_digit() {
                    text.push(bump(chars));
                } else {
                    break;
                }
            }
        }
    }
    if matches!(chars.peek(), Some('e') | Some('E')) {
        let mut probe = chars.clone();
        probe.next();
        let signed = matches!(probe.peek(), Some('+') | Some('-'));
        if signed {
            probe.next();
        }
        if probe.peek().is_some_and(|c| c.is_ascii_digit()) {
            text.push(bump(chars));
            if signed {
                text.push(bump(chars));
            }
            while let Some(&c) = chars.peek() {
                if c.is_ascii_digit() {
                    text.push(bump(chars));
                } else {
                    break;
                }
            }
        }
    }
    // fraction form n/d (exact rationals)
    if chars.peek() == Some(&'/') {
        let mut probe = chars.clone();
        probe.next();
        if probe.peek().is_some_and(|c| c.is_ascii_digit()) {
            text.push(bump(chars));
            while let Some(&c) = chars.peek() {
                if c.is_ascii_digit() {
                    text.push(bump(chars));
                } else {
                    break;
                }
            }
        }
    }
    text
}
