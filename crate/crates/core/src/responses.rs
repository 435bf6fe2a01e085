//! Dichotomous response storage with an explicit not-administered marker.

use crate::blocks::ItemId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Response {
    Incorrect = 0,
    Correct = 1,
    /// The examinee never saw the item. Distinct from an incorrect answer.
    NotAdministered = 2,
}

impl Response {
    pub fn from_outcome(correct: bool) -> Self {
        if correct {
            Response::Correct
        } else {
            Response::Incorrect
        }
    }

    /// `Some(correct)` for an observed response.
    pub fn observed(self) -> Option<bool> {
        match self {
            Response::Correct => Some(true),
            Response::Incorrect => Some(false),
            Response::NotAdministered => None,
        }
    }
}

/// Examinee-major response matrix over a fixed list of item columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseMatrix {
    item_ids: Vec<ItemId>,
    examinees: usize,
    cells: Vec<Response>,
}

impl ResponseMatrix {
    pub fn new(item_ids: Vec<ItemId>, examinees: usize, cells: Vec<Response>) -> Self {
        assert_eq!(cells.len(), item_ids.len() * examinees, "cell count must be examinees × items");
        ResponseMatrix { item_ids, examinees, cells }
    }

    pub fn item_ids(&self) -> &[ItemId] {
        &self.item_ids
    }

    pub fn examinees(&self) -> usize {
        self.examinees
    }

    pub fn items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn get(&self, examinee: usize, column: usize) -> Response {
        self.cells[examinee * self.item_ids.len() + column]
    }

    pub fn row(&self, examinee: usize) -> &[Response] {
        let n = self.item_ids.len();
        &self.cells[examinee * n..(examinee + 1) * n]
    }

    pub fn column(&self, column: usize) -> impl Iterator<Item = Response> + '_ {
        self.cells.iter().skip(column).step_by(self.item_ids.len()).copied()
    }

    pub fn column_of(&self, id: ItemId) -> Option<usize> {
        self.item_ids.iter().position(|&x| x == id)
    }

    /// Copy in which cells rejected by `keep(examinee, column)` become not administered.
    pub fn masked(&self, mut keep: impl FnMut(usize, usize) -> bool) -> ResponseMatrix {
        let n = self.item_ids.len();
        let cells = self
            .cells
            .iter()
            .enumerate()
            .map(|(k, &r)| if keep(k / n, k % n) { r } else { Response::NotAdministered })
            .collect();
        ResponseMatrix { item_ids: self.item_ids.clone(), examinees: self.examinees, cells }
    }

    /// Sub-matrix restricted to the given columns, in the given order.
    pub fn select(&self, columns: &[usize]) -> ResponseMatrix {
        let mut cells = Vec::with_capacity(columns.len() * self.examinees);
        for j in 0..self.examinees {
            let row = self.row(j);
            cells.extend(columns.iter().map(|&c| row[c]));
        }
        ResponseMatrix {
            item_ids: columns.iter().map(|&c| self.item_ids[c]).collect(),
            examinees: self.examinees,
            cells,
        }
    }
}
