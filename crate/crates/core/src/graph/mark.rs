use serde::{Deserialize, Serialize};

/// Mark at one end of a PAG edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EndpointMark {
    Tail,
    Arrow,
    Circle,
}

/// Edge type between an ordered pair (A, B).
///
/// The declaration order is the canonical order used for histogram bins and
/// for breaking ties during promotion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeCategory {
    /// A -> B
    Directed,
    /// A <- B
    ReverseDirected,
    /// A <-> B
    Bidirected,
    /// A o-> B
    PartialDirected,
    /// A <-o B
    ReversePartial,
    /// A o-o B
    Nondirected,
    NoEdge,
    /// A -- B
    Undirected,
}

impl EdgeCategory {
    /// The seven categories an expert may answer with, in bin order.
    pub const QUERYABLE: [EdgeCategory; 7] = [
        EdgeCategory::Directed,
        EdgeCategory::ReverseDirected,
        EdgeCategory::Bidirected,
        EdgeCategory::PartialDirected,
        EdgeCategory::ReversePartial,
        EdgeCategory::Nondirected,
        EdgeCategory::NoEdge,
    ];

    /// Classify a pair of marks (mark at A, mark at B).
    ///
    /// `(Tail, Circle)` and `(Circle, Tail)` have no category of their own and
    /// fold into `Undirected`.
    pub fn from_marks(at_a: EndpointMark, at_b: EndpointMark) -> EdgeCategory {
        use EndpointMark::*;
        match (at_a, at_b) {
            (Tail, Arrow) => EdgeCategory::Directed,
            (Arrow, Tail) => EdgeCategory::ReverseDirected,
            (Arrow, Arrow) => EdgeCategory::Bidirected,
            (Circle, Arrow) => EdgeCategory::PartialDirected,
            (Arrow, Circle) => EdgeCategory::ReversePartial,
            (Circle, Circle) => EdgeCategory::Nondirected,
            (Tail, Tail) | (Tail, Circle) | (Circle, Tail) => EdgeCategory::Undirected,
        }
    }

    /// (mark at A, mark at B), or `None` for `NoEdge`.
    pub fn marks(self) -> Option<(EndpointMark, EndpointMark)> {
        use EndpointMark::*;
        Some(match self {
            EdgeCategory::Directed => (Tail, Arrow),
            EdgeCategory::ReverseDirected => (Arrow, Tail),
            EdgeCategory::Bidirected => (Arrow, Arrow),
            EdgeCategory::PartialDirected => (Circle, Arrow),
            EdgeCategory::ReversePartial => (Arrow, Circle),
            EdgeCategory::Nondirected => (Circle, Circle),
            EdgeCategory::Undirected => (Tail, Tail),
            EdgeCategory::NoEdge => return None,
        })
    }

    /// The same edge seen from (B, A).
    pub fn reversed(self) -> EdgeCategory {
        match self.marks() {
            Some((a, b)) => EdgeCategory::from_marks(b, a),
            None => EdgeCategory::NoEdge,
        }
    }

    pub fn is_present(self) -> bool {
        self != EdgeCategory::NoEdge
    }

    /// Histogram bin, `None` for `Undirected`.
    pub fn bin(self) -> Option<usize> {
        Self::QUERYABLE.iter().position(|c| *c == self)
    }

    /// Option number used by the edge prompt.
    pub fn prompt_option(self) -> Option<u8> {
        Some(match self {
            EdgeCategory::NoEdge => 0,
            EdgeCategory::Directed => 1,
            EdgeCategory::Bidirected => 2,
            EdgeCategory::PartialDirected => 3,
            EdgeCategory::Nondirected => 4,
            EdgeCategory::ReverseDirected => 5,
            EdgeCategory::ReversePartial => 6,
            EdgeCategory::Undirected => return None,
        })
    }

    pub fn from_prompt_option(option: u8) -> Option<EdgeCategory> {
        Self::QUERYABLE
            .iter()
            .copied()
            .find(|c| c.prompt_option() == Some(option))
    }

    /// Two-character glyph as used in the text format, e.g. `->`.
    pub fn glyph(self) -> Option<String> {
        self.marks().map(|(a, b)| format!("{}{}", left_glyph(a), right_glyph(b)))
    }
}

/// Classify with an explicit presence flag; absent edges are `NoEdge`.
pub fn edge_category(at_a: EndpointMark, at_b: EndpointMark, present: bool) -> EdgeCategory {
    if present {
        EdgeCategory::from_marks(at_a, at_b)
    } else {
        EdgeCategory::NoEdge
    }
}

pub(crate) fn left_glyph(m: EndpointMark) -> char {
    match m {
        EndpointMark::Tail => '-',
        EndpointMark::Arrow => '<',
        EndpointMark::Circle => 'o',
    }
}

pub(crate) fn right_glyph(m: EndpointMark) -> char {
    match m {
        EndpointMark::Tail => '-',
        EndpointMark::Arrow => '>',
        EndpointMark::Circle => 'o',
    }
}

pub(crate) fn parse_left(c: char) -> Option<EndpointMark> {
    match c {
        '-' => Some(EndpointMark::Tail),
        '<' => Some(EndpointMark::Arrow),
        'o' => Some(EndpointMark::Circle),
        _ => None,
    }
}

pub(crate) fn parse_right(c: char) -> Option<EndpointMark> {
    match c {
        '-' => Some(EndpointMark::Tail),
        '>' => Some(EndpointMark::Arrow),
        'o' => Some(EndpointMark::Circle),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use EndpointMark::*;

    const ALL: [EndpointMark; 3] = [Tail, Arrow, Circle];

    #[test]
    fn basic_classification() {
        assert_eq!(edge_category(Tail, Arrow, true), EdgeCategory::Directed);
        assert_eq!(edge_category(Arrow, Arrow, true), EdgeCategory::Bidirected);
        assert_eq!(edge_category(Circle, Circle, true), EdgeCategory::Nondirected);
        assert_eq!(edge_category(Circle, Circle, false), EdgeCategory::NoEdge);
    }

    #[test]
    fn classification_round_trips_through_marks() {
        for a in ALL {
            for b in ALL {
                let c = edge_category(a, b, true);
                let (ma, mb) = c.marks().unwrap();
                assert_eq!(edge_category(ma, mb, true), c);
            }
        }
    }

    #[test]
    fn reversal_is_an_involution() {
        for c in EdgeCategory::QUERYABLE {
            assert_eq!(c.reversed().reversed(), c);
        }
        assert_eq!(EdgeCategory::PartialDirected.reversed(), EdgeCategory::ReversePartial);
    }

    #[test]
    fn prompt_options_cover_zero_to_six() {
        let mut seen: Vec<u8> = EdgeCategory::QUERYABLE
            .iter()
            .map(|c| c.prompt_option().unwrap())
            .collect();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3, 4, 5, 6]);
        assert_eq!(EdgeCategory::from_prompt_option(2), Some(EdgeCategory::Bidirected));
        assert_eq!(EdgeCategory::from_prompt_option(6), Some(EdgeCategory::ReversePartial));
        assert_eq!(EdgeCategory::from_prompt_option(7), None);
    }

    #[test]
    fn bins_follow_declaration_order() {
        for (i, c) in EdgeCategory::QUERYABLE.iter().enumerate() {
            assert_eq!(c.bin(), Some(i));
        }
        assert_eq!(EdgeCategory::Undirected.bin(), None);
    }
}
