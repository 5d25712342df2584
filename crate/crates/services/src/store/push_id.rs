/// Push ids are `<15-digit millis>-<6-digit counter>`, so lexicographic order
/// equals numeric order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct PushIdGen {
    last_ms: u64,
    counter: u32,
}

const COUNTER_LIMIT: u32 = 1_000_000;

impl PushIdGen {
    /// Strictly greater than every id produced or observed so far. If the
    /// clock has not moved forward (or went back), the counter advances.
    pub fn next(&mut self, now_ms: u64) -> String {
        if now_ms > self.last_ms {
            self.last_ms = now_ms;
            self.counter = 0;
        } else if self.counter + 1 < COUNTER_LIMIT {
            self.counter += 1;
        } else {
            self.last_ms += 1;
            self.counter = 0;
        }
        format_id(self.last_ms, self.counter)
    }

    /// Records an id seen during replay so later ids sort after it.
    pub fn observe(&mut self, id: &str) {
        if let Some((ms, counter)) = parse_id(id) {
            if (ms, counter) > (self.last_ms, self.counter) {
                self.last_ms = ms;
                self.counter = counter;
            }
        }
    }
}

pub fn format_id(ms: u64, counter: u32) -> String {
    format!("{ms:015}-{counter:06}")
}

pub fn parse_id(id: &str) -> Option<(u64, u32)> {
    let (ms, counter) = id.split_once('-')?;
    if ms.len() != 15 || counter.len() != 6 {
        return None;
    }
    if !ms
        .bytes()
        .chain(counter.bytes())
        .all(|b| b.is_ascii_digit())
    {
        return None;
    }
    Some((ms.parse().ok()?, counter.parse().ok()?))
}
