use crate::numeric::distance;

/// One retained state with its score and cached `log f`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeItem {
    pub state: Vec<f64>,
    /// Log of the ordering score.
    pub log_score: f64,
    pub log_f: f64,
}

/// Capped list of states kept in nonincreasing score order, with a minimum
/// spacing enforced on insertion.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeList {
    items: Vec<ModeItem>,
    cap: usize,
    spacing: f64,
}

/// What an update did to the list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Update {
    Unchanged,
    Inserted { at: usize, removed: Option<usize> },
    Appended,
}

impl ModeList {
    pub fn new(cap: usize, spacing: f64) -> Self {
        assert!(cap > 0, "mode list cap must be positive");
        Self { items: Vec::with_capacity(cap + 1), cap, spacing }
    }

    pub fn items(&self) -> &[ModeItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Offers `y` to the list.
    ///
    /// Walks the list in score order. At the first item scored below `y`,
    /// `y` is inserted ahead of it and the first later item closer than half
    /// the spacing is dropped; the walk then stops. If an item scored at
    /// least as high as `y` lies within the spacing first, `y` is discarded.
    /// A `y` that reaches the end of a short list is appended. The list is
    /// finally truncated to its cap.
    pub fn update(&mut self, y: ModeItem) -> Update {
        if !y.log_score.is_finite() {
            return Update::Unchanged;
        }
        let n = self.items.len();
        if !(n < self.cap || y.log_score > self.items[self.cap - 1].log_score) {
            return Update::Unchanged;
        }
        for j in 0..n.min(self.cap) {
            if y.log_score > self.items[j].log_score {
                let mut removed = None;
                for k in j..n {
                    if distance(&y.state, &self.items[k].state) < 0.5 * self.spacing {
                        self.items.remove(k);
                        removed = Some(k + 1);
                        break;
                    }
                }
                self.items.insert(j, y);
                self.items.truncate(self.cap);
                return Update::Inserted { at: j, removed };
            } else if distance(&y.state, &self.items[j].state) < self.spacing {
                return Update::Unchanged;
            }
        }
        if n < self.cap {
            self.items.push(y);
            return Update::Appended;
        }
        Update::Unchanged
    }
}

/// Free-function form of [`ModeList::update`].
pub fn mode_list_update(list: &mut ModeList, y: ModeItem) -> Update {
    list.update(y)
}
