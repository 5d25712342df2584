use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::path::StorePath;
use super::push_id::PushIdGen;
use super::StoreError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub id: String,
    #[serde(rename = "recvTs")]
    pub recv_ms: u64,
    pub data: Value,
}

/// Merges `patch` into `target`. Nested objects merge recursively, any other
/// value replaces the old one, and `null` removes the key.
pub fn merge(target: &mut Map<String, Value>, patch: &Map<String, Value>) {
    for (key, value) in patch {
        match value {
            Value::Null => {
                target.remove(key);
            }
            Value::Object(inner) => match target.get_mut(key) {
                Some(Value::Object(existing)) => merge(existing, inner),
                _ => {
                    let mut fresh = Map::new();
                    merge(&mut fresh, inner);
                    target.insert(key.clone(), Value::Object(fresh));
                }
            },
            other => {
                target.insert(key.clone(), other.clone());
            }
        }
    }
}

/// A validated mutation, ready to be logged and installed.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Change {
    SetDoc(StorePath, Map<String, Value>),
    SetEntry(StorePath, usize, Map<String, Value>),
    Append(StorePath, HistoryEntry),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StoreState {
    docs: BTreeMap<StorePath, Map<String, Value>>,
    histories: BTreeMap<StorePath, Vec<HistoryEntry>>,
    pub(crate) ids: PushIdGen,
}

fn as_object(doc: &Value) -> Result<&Map<String, Value>, StoreError> {
    doc.as_object().ok_or(StoreError::NotAnObject)
}

impl StoreState {
    pub fn is_collection(&self, path: &StorePath) -> bool {
        self.histories.contains_key(path)
    }

    /// Locates `<collection>/<pushId>` entry paths.
    fn entry_index(&self, path: &StorePath) -> Option<Result<(StorePath, usize), StoreError>> {
        let (parent, id) = path.split_last()?;
        let entries = self.histories.get(&parent)?;
        Some(
            entries
                .binary_search_by(|e| e.id.as_str().cmp(id))
                .map(|i| (parent, i))
                .map_err(|_| StoreError::NotFound(path.to_string())),
        )
    }

    pub(crate) fn prepare_patch(
        &self,
        path: &StorePath,
        doc: &Value,
    ) -> Result<Change, StoreError> {
        let patch = as_object(doc)?;
        if self.is_collection(path) {
            return Err(StoreError::Conflict(format!(
                "{path} is a history collection"
            )));
        }
        if let Some(found) = self.entry_index(path) {
            let (collection, index) = found?;
            let mut merged = match &self.histories[&collection][index].data {
                Value::Object(m) => m.clone(),
                _ => Map::new(),
            };
            merge(&mut merged, patch);
            return Ok(Change::SetEntry(collection, index, merged));
        }
        let mut merged = self.docs.get(path).cloned().unwrap_or_default();
        merge(&mut merged, patch);
        Ok(Change::SetDoc(path.clone(), merged))
    }

    pub(crate) fn prepare_append(
        &self,
        path: &StorePath,
        doc: &Value,
        id: String,
        recv_ms: u64,
    ) -> Result<Change, StoreError> {
        as_object(doc)?;
        if self.docs.contains_key(path) {
            return Err(StoreError::Conflict(format!("{path} holds a document")));
        }
        if let Some((parent, _)) = path.split_last() {
            if self.is_collection(&parent) {
                return Err(StoreError::Conflict(format!("{path} is a history entry")));
            }
        }
        if let Some(last) = self.histories.get(path).and_then(|h| h.last()) {
            if id <= last.id {
                return Err(StoreError::Conflict(format!(
                    "push id {id} does not follow {}",
                    last.id
                )));
            }
        }
        Ok(Change::Append(
            path.clone(),
            HistoryEntry {
                id,
                recv_ms,
                data: doc.clone(),
            },
        ))
    }

    pub(crate) fn apply(&mut self, change: Change) -> Value {
        match change {
            Change::SetDoc(path, doc) => {
                let out = Value::Object(doc.clone());
                self.docs.insert(path, doc);
                out
            }
            Change::SetEntry(collection, index, doc) => {
                let out = Value::Object(doc.clone());
                if let Some(entry) = self
                    .histories
                    .get_mut(&collection)
                    .and_then(|h| h.get_mut(index))
                {
                    entry.data = out.clone();
                }
                out
            }
            Change::Append(path, entry) => {
                self.ids.observe(&entry.id);
                let id = Value::String(entry.id.clone());
                self.histories.entry(path).or_default().push(entry);
                id
            }
        }
    }

    /// Document or history entry at `path`.
    pub fn get(&self, path: &StorePath) -> Option<Value> {
        if let Some(doc) = self.docs.get(path) {
            return Some(Value::Object(doc.clone()));
        }
        match self.entry_index(path) {
            Some(Ok((collection, index))) => Some(self.histories[&collection][index].data.clone()),
            _ => None,
        }
    }

    /// Entries strictly after `since`, oldest first, at most `limit`.
    pub fn history(
        &self,
        path: &StorePath,
        since: Option<&str>,
        limit: Option<usize>,
    ) -> Vec<HistoryEntry> {
        let Some(entries) = self.histories.get(path) else {
            return Vec::new();
        };
        let start = match since {
            Some(s) => entries.partition_point(|e| e.id.as_str() <= s),
            None => 0,
        };
        let end = limit.map_or(entries.len(), |l| {
            entries.len().min(start.saturating_add(l))
        });
        entries[start..end].to_vec()
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn history_len(&self, path: &StorePath) -> usize {
        self.histories.get(path).map_or(0, Vec::len)
    }

    pub fn docs(&self) -> impl Iterator<Item = (&StorePath, &Map<String, Value>)> {
        self.docs.iter()
    }

    pub fn collections(&self) -> impl Iterator<Item = (&StorePath, &[HistoryEntry])> {
        self.histories.iter().map(|(p, h)| (p, h.as_slice()))
    }
}
