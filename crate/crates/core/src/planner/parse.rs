//! Restricted literal parser for planner code blocks.
//!
//! Grammar: assignments `name = literal` and one call to `generate_motion`,
//! `generate_interaction` (alias `generate_human_object`, optional `model.` prefix) or
//! `task_completed`. Literals are numbers, strings, lists and parenthesized groups.
//! Bare `\n` markers outside strings are ignored, as are `#` comments.

use crate::error::{Error, Result};
use crate::executor::{InteractionArgs, MotionArgs};
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub enum AgentCommand {
    GenerateMotion(MotionArgs),
    GenerateInteraction(InteractionArgs),
    TaskCompleted,
}

impl AgentCommand {
    pub fn kind(&self) -> &'static str {
        match self {
            AgentCommand::GenerateMotion(_) => "generate_motion",
            AgentCommand::GenerateInteraction(_) => "generate_interaction",
            AgentCommand::TaskCompleted => "task_completed",
        }
    }

    /// Fenced code block that parses back to `self`.
    pub fn to_code_block(&self) -> String {
        let mut s = String::from("```python\n");
        match self {
            AgentCommand::TaskCompleted => s.push_str("task_completed()\n"),
            AgentCommand::GenerateMotion(m) => {
                emit_motion(&mut s, m);
                s.push_str("generate_motion(control_joints, control_points, text, number_frames, task_index)\n");
            }
            AgentCommand::GenerateInteraction(i) => {
                emit_motion(&mut s, &i.motion);
                let _ = writeln!(s, "object_name = {}", str_list(&i.object_name));
                let _ = writeln!(s, "object_points = {}", tracks_literal(&i.object_points));
                s.push_str(
                    "generate_interaction(control_joints, control_points, text, number_frames, task_index, object_name, object_points)\n",
                );
            }
        }
        s.push_str("```\n");
        s
    }
}

fn emit_motion(s: &mut String, m: &MotionArgs) {
    let _ = writeln!(s, "control_joints = {}", str_list(&m.control_joints));
    let _ = writeln!(s, "control_points = {}", tracks_literal(&m.control_points));
    let _ = writeln!(s, "text = {}", quote(&m.text));
    let _ = writeln!(s, "number_frames = {}", m.number_frames);
    let _ = writeln!(s, "task_index = {}", m.task_index);
}

fn quote(text: &str) -> String {
    let mut out = String::from("\"");
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

fn str_list(items: &[String]) -> String {
    let parts: Vec<String> = items.iter().map(|s| quote(s)).collect();
    format!("[{}]", parts.join(", "))
}

fn number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:?}")
    }
}

fn tracks_literal(tracks: &[Vec<[f64; 4]>]) -> String {
    let mut s = String::from("[\n");
    for t in tracks {
        s.push_str("    [\n");
        for r in t {
            let _ = writeln!(s, "        [{}, {}, {}, {}],", number(r[0]), number(r[1]), number(r[2]), number(r[3]));
        }
        s.push_str("    ],\n");
    }
    s.push(']');
    s
}

/// Commands from every fenced block, plus recoverable lexical warnings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedMessage {
    pub commands: Vec<AgentCommand>,
    pub warnings: Vec<String>,
}

/// Extracts commands from all fenced code blocks in `message`. A message without
/// code blocks yields an empty list.
pub fn parse_commands(message: &str) -> Result<Vec<AgentCommand>> {
    parse_message(message).map(|p| p.commands)
}

pub fn parse_message(message: &str) -> Result<ParsedMessage> {
    let mut out = ParsedMessage::default();
    for (first_line, body) in code_blocks(message) {
        let mut warnings = Vec::new();
        if let Some(cmd) = parse_block(&body, first_line, &mut warnings)? {
            out.commands.push(cmd);
        }
        out.warnings.append(&mut warnings);
    }
    Ok(out)
}

/// Python-tagged or untagged fenced blocks as (line number of first body line, body).
fn code_blocks(message: &str) -> Vec<(usize, String)> {
    let mut blocks = Vec::new();
    let mut current: Option<(usize, bool, Vec<&str>)> = None;
    for (i, line) in message.lines().enumerate() {
        let t = line.trim_start();
        if let Some(rest) = t.strip_prefix("```") {
            match current.take() {
                Some((start, keep, body)) => {
                    if keep {
                        blocks.push((start, body.join("\n")));
                    }
                }
                None => {
                    let tag = rest.trim().trim_end_matches("\\n").trim().to_ascii_lowercase();
                    let keep = matches!(tag.as_str(), "" | "python" | "py" | "python3");
                    current = Some((i + 2, keep, Vec::new()));
                }
            }
        } else if let Some((_, _, body)) = current.as_mut() {
            body.push(line);
        }
    }
    blocks
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    Num(f64),
    Str(String),
    Sym(char),
    Newline,
}

fn lex(src: &str, base_line: usize, warnings: &mut Vec<String>) -> Result<Vec<(Tok, usize)>> {
    let mut toks = Vec::new();
    for (k, raw) in src.lines().enumerate() {
        let ln = base_line + k;
        let chars: Vec<char> = raw.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            match c {
                ' ' | '\t' | '\r' => i += 1,
                '#' => break,
                '\\' => {
                    // Stray `\n` markers, or a line continuation.
                    if i + 1 < chars.len() && chars[i + 1] == 'n' {
                        i += 2;
                    } else if chars[i + 1..].iter().all(|c| c.is_whitespace()) {
                        i = chars.len();
                        continue;
                    } else {
                        return Err(Error::parse(ln, "unexpected backslash"));
                    }
                }
                '"' | '\'' => {
                    let mut s = String::new();
                    let mut j = i + 1;
                    let mut closed = false;
                    while j < chars.len() {
                        match chars[j] {
                            '\\' if j + 1 < chars.len() => {
                                s.push(match chars[j + 1] {
                                    'n' => '\n',
                                    't' => '\t',
                                    other => other,
                                });
                                j += 2;
                            }
                            q if q == c => {
                                closed = true;
                                j += 1;
                                break;
                            }
                            other => {
                                s.push(other);
                                j += 1;
                            }
                        }
                    }
                    if closed {
                        toks.push((Tok::Str(s), ln));
                        i = j;
                    } else {
                        // Give trailing closers back to the token stream.
                        let kept = s.trim_end_matches(|ch: char| matches!(ch, ']' | ')' | ',') || ch.is_whitespace());
                        if kept.is_empty() {
                            return Err(Error::parse(ln, "unterminated string literal"));
                        }
                        warnings.push(format!("line {ln}: unterminated string recovered as {kept:?}"));
                        toks.push((Tok::Str(kept.to_string()), ln));
                        i += 1 + kept.chars().count();
                    }
                }
                c if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) => {
                    let mut j = i;
                    while j < chars.len()
                        && (chars[j].is_ascii_digit()
                            || chars[j] == '.'
                            || chars[j] == '_'
                            || matches!(chars[j], 'e' | 'E')
                            || (matches!(chars[j], '+' | '-') && j > i && matches!(chars[j - 1], 'e' | 'E')))
                    {
                        j += 1;
                    }
                    let text: String = chars[i..j].iter().filter(|c| **c != '_').collect();
                    let v: f64 = text.parse().map_err(|_| Error::parse(ln, format!("bad number `{text}`")))?;
                    toks.push((Tok::Num(v), ln));
                    i = j;
                }
                c if c.is_alphabetic() || c == '_' => {
                    let mut j = i;
                    while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                        j += 1;
                    }
                    toks.push((Tok::Name(chars[i..j].iter().collect()), ln));
                    i = j;
                }
                '[' | ']' | '(' | ')' | ',' | '=' | '.' | '-' | '+' => {
                    toks.push((Tok::Sym(c), ln));
                    i += 1;
                }
                other => {
                    return Err(Error::parse(ln, format!("unsupported syntax `{other}`; only literal assignments and one function call are allowed")));
                }
            }
        }
        toks.push((Tok::Newline, ln));
    }
    Ok(toks)
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Num(f64),
    Str(String),
    List(Vec<Value>),
}

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    depth: usize,
    vars: BTreeMap<String, Value>,
}

const PARAMS_MOTION: [&str; 5] = ["control_joints", "control_points", "text", "number_frames", "task_index"];
const PARAMS_INTERACTION: [&str; 7] =
    ["control_joints", "control_points", "text", "number_frames", "task_index", "object_name", "object_points"];

impl<'a> Parser<'a> {
    fn line(&self) -> usize {
        self.toks.get(self.pos).or(self.toks.last()).map_or(0, |t| t.1)
    }

    /// Next token, skipping newlines inside brackets.
    fn peek(&self) -> Option<&Tok> {
        let mut p = self.pos;
        while let Some((t, _)) = self.toks.get(p) {
            if *t == Tok::Newline && self.depth > 0 {
                p += 1;
                continue;
            }
            return Some(t);
        }
        None
    }

    fn bump(&mut self) -> Option<Tok> {
        while let Some((t, _)) = self.toks.get(self.pos) {
            self.pos += 1;
            if *t == Tok::Newline && self.depth > 0 {
                continue;
            }
            return Some(t.clone());
        }
        None
    }

    fn skip_to_content(&mut self) {
        while self.toks.get(self.pos).is_some_and(|t| t.0 == Tok::Newline) {
            self.pos += 1;
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<()> {
        let ln = self.line();
        match self.bump() {
            Some(Tok::Sym(s)) if s == c => Ok(()),
            other => Err(Error::parse(ln, format!("expected `{c}`, found {}", describe(other.as_ref())))),
        }
    }

    fn end_of_statement(&mut self) -> Result<()> {
        let ln = self.line();
        match self.bump() {
            None | Some(Tok::Newline) => Ok(()),
            Some(Tok::Sym(c)) if matches!(c, '+' | '-') => {
                Err(Error::parse(ln, "arithmetic is not supported; write the literal value"))
            }
            other => Err(Error::parse(ln, format!("unexpected {} after statement", describe(other.as_ref())))),
        }
    }

    fn value(&mut self) -> Result<Value> {
        let ln = self.line();
        let v = match self.bump() {
            Some(Tok::Num(x)) => Value::Num(x),
            Some(Tok::Sym('-')) => match self.bump() {
                Some(Tok::Num(x)) => Value::Num(-x),
                other => return Err(Error::parse(ln, format!("expected a number after `-`, found {}", describe(other.as_ref())))),
            },
            Some(Tok::Sym('+')) => match self.bump() {
                Some(Tok::Num(x)) => Value::Num(x),
                other => return Err(Error::parse(ln, format!("expected a number after `+`, found {}", describe(other.as_ref())))),
            },
            Some(Tok::Str(s)) => {
                let mut s = s;
                while let Some(Tok::Str(more)) = self.peek().cloned() {
                    self.bump();
                    s.push_str(&more);
                }
                Value::Str(s)
            }
            Some(Tok::Sym('[')) => {
                self.depth += 1;
                let mut items = Vec::new();
                loop {
                    if self.peek() == Some(&Tok::Sym(']')) {
                        self.bump();
                        break;
                    }
                    items.push(self.value()?);
                    match self.bump() {
                        Some(Tok::Sym(',')) => continue,
                        Some(Tok::Sym(']')) => break,
                        Some(Tok::Sym(c)) if matches!(c, '+' | '-') => {
                            return Err(Error::parse(self.line(), "arithmetic is not supported; write the literal value"))
                        }
                        other => return Err(Error::parse(self.line(), format!("expected `,` or `]`, found {}", describe(other.as_ref())))),
                    }
                }
                self.depth -= 1;
                Value::List(items)
            }
            Some(Tok::Sym('(')) => {
                self.depth += 1;
                let v = self.value()?;
                let ln = self.line();
                match self.bump() {
                    Some(Tok::Sym(')')) => {}
                    Some(Tok::Sym(',')) => return Err(Error::parse(ln, "tuples are not supported; use a list")),
                    other => return Err(Error::parse(ln, format!("expected `)`, found {}", describe(other.as_ref())))),
                }
                self.depth -= 1;
                v
            }
            Some(Tok::Name(n)) => {
                if self.peek() == Some(&Tok::Sym('(')) {
                    return Err(Error::parse(ln, format!("function call `{n}(...)` is not allowed inside an expression")));
                }
                match self.vars.get(&n) {
                    Some(v) => v.clone(),
                    None => return Err(Error::parse(ln, format!("`{n}` is not a literal or a previously assigned name"))),
                }
            }
            other => return Err(Error::parse(ln, format!("expected a literal, found {}", describe(other.as_ref())))),
        };
        if let Some(Tok::Sym(c)) = self.peek() {
            if matches!(c, '+' | '-') && self.depth > 0 {
                return Err(Error::parse(self.line(), "arithmetic is not supported; write the literal value"));
            }
        }
        Ok(v)
    }
}

fn describe(t: Option<&Tok>) -> String {
    match t {
        None => "end of block".into(),
        Some(Tok::Newline) => "end of line".into(),
        Some(Tok::Name(n)) => format!("`{n}`"),
        Some(Tok::Num(x)) => format!("number {x}"),
        Some(Tok::Str(_)) => "string".into(),
        Some(Tok::Sym(c)) => format!("`{c}`"),
    }
}

const KEYWORDS: [&str; 12] = ["for", "while", "if", "else", "def", "import", "from", "return", "lambda", "with", "class", "in"];

fn parse_block(body: &str, base_line: usize, warnings: &mut Vec<String>) -> Result<Option<AgentCommand>> {
    let toks = lex(body, base_line, warnings)?;
    let mut p = Parser { toks: &toks, pos: 0, depth: 0, vars: BTreeMap::new() };
    let mut command = None;
    loop {
        p.skip_to_content();
        let ln = p.line();
        let Some(tok) = p.bump() else { break };
        let Tok::Name(name) = tok else {
            return Err(Error::parse(ln, format!("expected an assignment or a call, found {}", describe(Some(&tok)))));
        };
        if KEYWORDS.contains(&name.as_str()) {
            return Err(Error::parse(ln, format!("`{name}` statements are not supported; use literal values only")));
        }
        match p.peek() {
            Some(Tok::Sym('=')) => {
                p.bump();
                let v = p.value()?;
                p.end_of_statement()?;
                p.vars.insert(name, v);
            }
            Some(Tok::Sym('.')) | Some(Tok::Sym('(')) => {
                let mut func = name.clone();
                if p.peek() == Some(&Tok::Sym('.')) {
                    p.bump();
                    let ln = p.line();
                    match p.bump() {
                        Some(Tok::Name(f)) if name == "model" => func = f,
                        other => {
                            return Err(Error::Protocol(format!(
                                "line {ln}: unknown function `{name}.{}`",
                                match other { Some(Tok::Name(f)) => f, _ => "?".into() }
                            )))
                        }
                    }
                }
                if command.is_some() {
                    return Err(Error::Protocol(format!("line {ln}: only one function call is allowed per code block")));
                }
                command = Some(parse_call(&mut p, &func, ln)?);
                p.end_of_statement()?;
            }
            other => {
                return Err(Error::parse(ln, format!("expected `=` or `(` after `{name}`, found {}", describe(other))));
            }
        }
    }
    Ok(command)
}

fn parse_call(p: &mut Parser, func: &str, ln: usize) -> Result<AgentCommand> {
    let params: &[&str] = match func {
        "generate_motion" => &PARAMS_MOTION,
        "generate_interaction" | "generate_human_object" => &PARAMS_INTERACTION,
        "task_completed" => &[],
        other => {
            return Err(Error::Protocol(format!(
                "line {ln}: unknown function `{other}`; available functions are generate_motion, generate_interaction and task_completed"
            )))
        }
    };
    p.expect_sym('(')?;
    p.depth += 1;
    let mut bound: BTreeMap<&str, Value> = BTreeMap::new();
    let mut positional = 0;
    loop {
        if p.peek() == Some(&Tok::Sym(')')) {
            p.bump();
            break;
        }
        let arg_ln = p.line();
        let keyword = match (p.toks.get(p.pos).map(|t| &t.0), p.toks.get(p.pos + 1).map(|t| &t.0)) {
            (Some(Tok::Name(n)), Some(Tok::Sym('='))) => Some(n.clone()),
            _ => None,
        };
        let (key, v) = if let Some(k) = keyword {
            p.bump();
            p.bump();
            let key = *params
                .iter()
                .find(|q| **q == k)
                .ok_or_else(|| Error::Protocol(format!("line {arg_ln}: `{func}` has no parameter `{k}`")))?;
            (key, p.value()?)
        } else {
            if positional >= params.len() {
                return Err(Error::Protocol(format!("line {arg_ln}: too many arguments to `{func}`")));
            }
            positional += 1;
            (params[positional - 1], p.value()?)
        };
        if bound.insert(key, v).is_some() {
            return Err(Error::Protocol(format!("line {arg_ln}: argument `{key}` given twice")));
        }
        match p.bump() {
            Some(Tok::Sym(',')) => continue,
            Some(Tok::Sym(')')) => break,
            other => return Err(Error::parse(p.line(), format!("expected `,` or `)`, found {}", describe(other.as_ref())))),
        }
    }
    p.depth -= 1;
    if let Some(missing) = params.iter().find(|k| !bound.contains_key(*k)) {
        return Err(Error::Protocol(format!("line {ln}: `{func}` is missing argument `{missing}`")));
    }
    if params.is_empty() {
        return Ok(AgentCommand::TaskCompleted);
    }
    let motion = MotionArgs {
        control_joints: strings(&bound["control_joints"], "control_joints")?,
        control_points: tracks(&bound["control_points"], "control_points")?,
        text: match &bound["text"] {
            Value::Str(s) => s.clone(),
            _ => return Err(Error::Protocol("text must be a string".into())),
        },
        number_frames: integer(&bound["number_frames"], "number_frames")?,
        task_index: integer(&bound["task_index"], "task_index")?,
    };
    if params.len() == PARAMS_MOTION.len() {
        return Ok(AgentCommand::GenerateMotion(motion));
    }
    Ok(AgentCommand::GenerateInteraction(InteractionArgs {
        motion,
        object_name: strings(&bound["object_name"], "object_name")?,
        object_points: tracks(&bound["object_points"], "object_points")?,
    }))
}

fn strings(v: &Value, what: &str) -> Result<Vec<String>> {
    let Value::List(items) = v else { return Err(Error::Protocol(format!("{what} must be a list of strings"))) };
    items
        .iter()
        .map(|i| match i {
            Value::Str(s) => Ok(s.clone()),
            _ => Err(Error::Protocol(format!("{what} must be a list of strings"))),
        })
        .collect()
}

fn integer(v: &Value, what: &str) -> Result<i64> {
    match v {
        Value::Num(x) if x.fract() == 0.0 && x.abs() < 1e15 => Ok(*x as i64),
        _ => Err(Error::Protocol(format!("{what} must be an integer"))),
    }
}

fn tracks(v: &Value, what: &str) -> Result<Vec<Vec<[f64; 4]>>> {
    let shape = || Error::Protocol(format!("{what} must be a list of tracks, each a list of [frame, x, y, z] rows"));
    let Value::List(ts) = v else { return Err(shape()) };
    ts.iter()
        .map(|t| {
            let Value::List(rows) = t else { return Err(shape()) };
            rows.iter()
                .map(|r| match r {
                    Value::List(xs) if xs.len() == 4 => {
                        let mut row = [0.0; 4];
                        for (k, x) in xs.iter().enumerate() {
                            match x {
                                Value::Num(n) => row[k] = *n,
                                _ => return Err(shape()),
                            }
                        }
                        Ok(row)
                    }
                    _ => Err(shape()),
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(body: &str) -> String {
        format!("Explanation:\nsomething\n```python\n{body}\n```\n")
    }

    #[test]
    fn task_completed_block() {
        let cmds = parse_commands("```python\n\ntask_completed()\n\n```").unwrap();
        assert_eq!(cmds, vec![AgentCommand::TaskCompleted]);
        let cmds = parse_commands("```python\\n\ntask_completed()\\n\n```\\n").unwrap();
        assert_eq!(cmds, vec![AgentCommand::TaskCompleted]);
    }

    #[test]
    fn no_block_is_empty() {
        assert!(parse_commands("## Plan\n| a | b |\nno code").unwrap().is_empty());
    }

    #[test]
    fn keyword_and_positional() {
        let src = block(
            "generate_motion(['pelvis'], [[[0, 1, 2, 0.9], [30, 2, 2, 0.9]]], text=\"go\", number_frames=30, task_index=3)",
        );
        let cmds = parse_commands(&src).unwrap();
        let AgentCommand::GenerateMotion(m) = &cmds[0] else { panic!() };
        assert_eq!(m.control_points[0][1], [30.0, 2.0, 2.0, 0.9]);
        assert_eq!(m.task_index, 3);
    }

    #[test]
    fn implicit_concatenation() {
        let src = block("text = (\n  \"a \"\n  'b'\n)\ntask_completed()");
        assert!(parse_commands(&src).is_ok());
    }

    #[test]
    fn rejects_loops_and_arithmetic() {
        let lp = block("for i in range(3):\n    pass");
        assert!(matches!(parse_commands(&lp), Err(Error::Parse { line: 4, .. })));
        let ar = block("number_frames = 30 + 30");
        assert!(matches!(parse_commands(&ar), Err(Error::Parse { .. })));
        let ar2 = block("control_points = [[[0, 1, 2, 0.9 * 2]]]");
        assert!(matches!(parse_commands(&ar2), Err(Error::Parse { .. })));
        let nested = block("x = [len(y)]");
        assert!(matches!(parse_commands(&nested), Err(Error::Parse { .. })));
    }

    #[test]
    fn unknown_function_is_protocol_error() {
        assert!(matches!(parse_commands(&block("launch_rocket()")), Err(Error::Protocol(_))));
        assert!(matches!(parse_commands(&block("os.system()")), Err(Error::Protocol(_))));
    }

    #[test]
    fn missing_argument() {
        let src = block("generate_motion(['pelvis'], [], 'x', 30)");
        assert!(matches!(parse_commands(&src), Err(Error::Protocol(m)) if m.contains("task_index")));
    }

    #[test]
    fn unterminated_string_recovers() {
        let src = block("object_name = [\"trashcan\", \"smallbox]\ntask_completed()");
        let p = parse_message(&src).unwrap();
        assert_eq!(p.warnings.len(), 1);
        assert_eq!(p.commands, vec![AgentCommand::TaskCompleted]);
    }

    #[test]
    fn other_languages_skipped() {
        assert!(parse_commands("```json\n{\"a\": 1}\n```").unwrap().is_empty());
    }
}
