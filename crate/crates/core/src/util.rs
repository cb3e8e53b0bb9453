//! Small shared utilities.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

/// Single-producer single-consumer handoff with queue depth 1.
///
/// The producer never blocks: publishing replaces whatever is in the slot
/// (latest wins). Consumers block until something newer than what they last
/// saw arrives.
pub struct LatestSlot<T> {
    state: Mutex<SlotState<T>>,
    cond: Condvar,
}

struct SlotState<T> {
    value: Option<T>,
    version: u64,
    closed: bool,
}

impl<T> Default for LatestSlot<T> {
    fn default() -> Self {
        LatestSlot {
            state: Mutex::new(SlotState {
                value: None,
                version: 0,
                closed: false,
            }),
            cond: Condvar::new(),
        }
    }
}

impl<T: Clone> LatestSlot<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replaces the slot content; never blocks on consumers.
    pub fn publish(&self, value: T) {
        let mut s = self.state.lock().unwrap();
        s.value = Some(value);
        s.version += 1;
        self.cond.notify_all();
    }

    /// Marks the slot closed; consumers waiting or arriving later get `None`.
    pub fn close(&self) {
        let mut s = self.state.lock().unwrap();
        s.closed = true;
        self.cond.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.state.lock().unwrap().closed
    }

    /// Current version counter (number of publishes).
    pub fn version(&self) -> u64 {
        self.state.lock().unwrap().version
    }

    /// Returns a clone of the newest value with version > `seen`, blocking
    /// up to `timeout`. `Ok(None)` on close, `Err(())` on timeout.
    pub fn wait_newer(
        &self,
        seen: u64,
        timeout: Duration,
    ) -> std::result::Result<Option<(T, u64)>, ()> {
        let mut s = self.state.lock().unwrap();
        loop {
            if s.closed {
                return Ok(None);
            }
            if s.version > seen {
                let v = s.version;
                return Ok(s.value.clone().map(|x| (x, v)));
            }
            let (guard, res) = self.cond.wait_timeout(s, timeout).unwrap();
            s = guard;
            if res.timed_out() && s.version <= seen && !s.closed {
                return Err(());
            }
        }
    }

    /// Non-blocking peek at the newest value.
    pub fn latest(&self) -> Option<(T, u64)> {
        let s = self.state.lock().unwrap();
        s.value.clone().map(|x| (x, s.version))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;
    use std::thread;

    #[test]
    fn latest_wins_under_fast_producer() {
        let slot = Arc::new(LatestSlot::new());
        for i in 0..100 {
            slot.publish(i);
        }
        let (v, ver) = slot.latest().unwrap();
        assert_eq!(v, 99);
        assert_eq!(ver, 100);
    }

    #[test]
    fn consumer_sees_fresh_values_and_close() {
        let slot: Arc<LatestSlot<u64>> = Arc::new(LatestSlot::new());
        let s2 = slot.clone();
        let producer = thread::spawn(move || {
            for i in 0..50 {
                s2.publish(i);
                thread::sleep(Duration::from_micros(200));
            }
            s2.close();
        });
        let mut seen = 0;
        let mut last = None;
        loop {
            match slot.wait_newer(seen, Duration::from_secs(1)) {
                Ok(Some((v, ver))) => {
                    if let Some(prev) = last {
                        assert!(v > prev, "stale value after {prev}: {v}");
                    }
                    last = Some(v);
                    seen = ver;
                }
                Ok(None) => break,
                Err(()) => panic!("timed out"),
            }
        }
        producer.join().unwrap();
        assert_eq!(last, Some(49));
    }
}
