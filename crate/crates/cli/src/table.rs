//! CSV emission. Numbers use scientific notation with 12 significant digits.

use std::fmt::Write as _;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            // `+ 0.0` turns a negative zero into a positive one.
            Cell::Num(x) => write!(out, "{:.11e}", x + 0.0).unwrap(),
            Cell::Int(i) => write!(out, "{i}").unwrap(),
            Cell::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Cell::Text(s) => {
                if s.contains([',', '"', '\n']) {
                    out.push('"');
                    out.push_str(&s.replace('"', "\"\"").replace('\n', " "));
                    out.push('"');
                } else {
                    out.push_str(s);
                }
            }
            Cell::Empty => {}
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    command: String,
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
    failures: usize,
    notes: Vec<String>,
}

impl Table {
    pub fn new(command: &str, header: Vec<String>) -> Self {
        Self {
            command: command.to_string(),
            header,
            rows: vec![],
            failures: 0,
            notes: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_failure(&mut self, row: Vec<Cell>) {
        self.failures += 1;
        self.push(row);
    }

    pub fn note(&mut self, text: &str) {
        self.notes.push(text.to_string());
    }

    pub fn failures(&self) -> usize {
        self.failures
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# schema={SCHEMA_VERSION}").unwrap();
        writeln!(out, "# command={}", self.command).unwrap();
        for note in &self.notes {
            writeln!(out, "# {note}").unwrap();
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                cell.render(&mut out);
            }
            out.push('\n');
        }
        out
    }
}
