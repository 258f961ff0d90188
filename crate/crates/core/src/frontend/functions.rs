//! Function extraction and line-range lookup.

use std::ops::RangeInclusive;

use thiserror::Error;

use super::lexer::{lex, LexError};
use super::parser::{parse, visit_functions, ParseError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSpan {
    /// Qualified as `Class::method` for methods.
    pub name: String,
    pub start_line: usize,
    pub end_line: usize,
    /// Exact source slice of the declaration.
    pub body: String,
}

impl FunctionSpan {
    pub fn lines(&self) -> RangeInclusive<usize> {
        self.start_line..=self.end_line
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

impl ExtractError {
    pub fn location(&self) -> (usize, usize) {
        match self {
            ExtractError::Lex(e) => (e.line, e.col),
            ExtractError::Parse(e) => (e.line, e.col),
        }
    }
}

/// Named functions and methods of a PHP file, in source order. Nested
/// declarations are reported separately from their parent; closures and
/// top-level code are not reported.
pub fn extract_functions(source: &str) -> Result<Vec<FunctionSpan>, ExtractError> {
    let tokens = lex(source)?;
    let stmts = parse(&tokens)?;
    let mut out = Vec::new();
    visit_functions(&stmts, &mut |d| {
        if let Some(name) = d.qualified_name() {
            out.push(FunctionSpan {
                name,
                start_line: d.start_line,
                end_line: d.end_line,
                body: source[d.start_offset..d.end_offset].to_string(),
            });
        }
    });
    Ok(out)
}

#[derive(Debug, Clone)]
struct Entry<T> {
    start: usize,
    end: usize,
    value: T,
}

/// Static interval tree over closed ranges, laid out as an implicit
/// balanced binary tree over intervals sorted by start. Each node keeps the
/// largest end in its subtree so stabbing queries prune whole branches.
#[derive(Debug, Clone)]
pub struct IntervalTree<T> {
    entries: Vec<Entry<T>>,
    max_end: Vec<usize>,
}

impl<T> IntervalTree<T> {
    pub fn new(intervals: impl IntoIterator<Item = (RangeInclusive<usize>, T)>) -> Self {
        let mut entries: Vec<Entry<T>> =
            intervals.into_iter().map(|(r, value)| Entry { start: *r.start(), end: *r.end(), value }).collect();
        entries.sort_by_key(|e| (e.start, e.end));
        let mut max_end = vec![0; entries.len()];
        if !entries.is_empty() {
            fill_max(&entries, &mut max_end, 0, entries.len());
        }
        IntervalTree { entries, max_end }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// All intervals containing `point`, ordered by (start, end).
    pub fn stab(&self, point: usize) -> Vec<(RangeInclusive<usize>, &T)> {
        let mut out = Vec::new();
        if !self.entries.is_empty() {
            self.stab_rec(point, 0, self.entries.len(), &mut out);
        }
        out
    }

    /// Whether any interval contains `point`.
    pub fn contains_point(&self, point: usize) -> bool {
        !self.stab(point).is_empty()
    }

    fn stab_rec<'a>(&'a self, point: usize, lo: usize, hi: usize, out: &mut Vec<(RangeInclusive<usize>, &'a T)>) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        if self.max_end[mid] < point {
            return;
        }
        self.stab_rec(point, lo, mid, out);
        let e = &self.entries[mid];
        if e.start <= point {
            if point <= e.end {
                out.push((e.start..=e.end, &e.value));
            }
            self.stab_rec(point, mid + 1, hi, out);
        }
    }
}

fn fill_max<T>(entries: &[Entry<T>], max_end: &mut [usize], lo: usize, hi: usize) -> usize {
    if lo >= hi {
        return 0;
    }
    let mid = lo + (hi - lo) / 2;
    let left = fill_max(entries, max_end, lo, mid);
    let right = fill_max(entries, max_end, mid + 1, hi);
    max_end[mid] = entries[mid].end.max(left).max(right);
    max_end[mid]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_function() {
        let src = "<?php\n\nfunction f($a) {\n  $b = $a;\n\n\n\n  return $b;\n}\necho 1;\n";
        let fs = extract_functions(src).unwrap();
        assert_eq!(fs.len(), 1);
        assert_eq!((fs[0].name.as_str(), fs[0].start_line, fs[0].end_line), ("f", 3, 9));
        assert!(fs[0].body.starts_with("function f($a) {"));
        assert!(fs[0].body.ends_with("return $b;\n}"));
    }

    #[test]
    fn no_functions() {
        assert!(extract_functions("<?php echo $_GET['a']; $f = function() { return 1; };").unwrap().is_empty());
    }

    #[test]
    fn nested_and_methods() {
        let src = "<?php\nclass C {\n  function m() {\n    function inner() {}\n  }\n}\n";
        let fs = extract_functions(src).unwrap();
        let names: Vec<_> = fs.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["C::m", "inner"]);
        assert!(fs[0].start_line <= fs[1].start_line && fs[1].end_line <= fs[0].end_line);
    }

    #[test]
    fn parse_error_has_location() {
        let err = extract_functions("<?php\nfunction f() {\n").unwrap_err();
        assert!(err.location().0 >= 2);
    }

    #[test]
    fn stabbing_small() {
        let t = IntervalTree::new([(1..=5, 'a'), (3..=9, 'b'), (10..=12, 'c')]);
        let hit: Vec<char> = t.stab(4).into_iter().map(|(_, v)| *v).collect();
        assert_eq!(hit, ['a', 'b']);
        assert!(t.stab(0).is_empty());
        assert_eq!(t.stab(10).len(), 1);
    }

    proptest! {
        #[test]
        fn stab_matches_linear_scan(
            ivs in prop::collection::vec((0usize..60, 0usize..15), 0..40),
            point in 0usize..80,
        ) {
            let ranges: Vec<_> = ivs.iter().map(|&(s, l)| s..=s + l).collect();
            let tree = IntervalTree::new(ranges.iter().cloned().enumerate().map(|(i, r)| (r, i)));
            let mut got: Vec<usize> = tree.stab(point).into_iter().map(|(_, &i)| i).collect();
            got.sort_unstable();
            let want: Vec<usize> = ranges.iter().enumerate().filter(|(_, r)| r.contains(&point)).map(|(i, _)| i).collect();
            prop_assert_eq!(got, want);
        }
    }
}
