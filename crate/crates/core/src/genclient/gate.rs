use std::sync::{Condvar, Mutex};

/// Counting semaphore bounding the number of in-flight requests.
#[derive(Debug)]
pub struct AdmissionGate {
    limit: usize,
    state: Mutex<(usize, usize)>,
    freed: Condvar,
}

/// Held while a request is in flight.
#[derive(Debug)]
pub struct Permit<'a> {
    gate: &'a AdmissionGate,
}

impl AdmissionGate {
    pub fn new(limit: usize) -> Self {
        Self { limit: limit.max(1), state: Mutex::new((0, 0)), freed: Condvar::new() }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    /// Blocks until a slot is free.
    pub fn acquire(&self) -> Permit<'_> {
        let mut s = self.state.lock().unwrap();
        while s.0 >= self.limit {
            s = self.freed.wait(s).unwrap();
        }
        s.0 += 1;
        s.1 = s.1.max(s.0);
        Permit { gate: self }
    }

    pub fn in_flight(&self) -> usize {
        self.state.lock().unwrap().0
    }

    /// Highest number of simultaneous permits seen so far.
    pub fn peak(&self) -> usize {
        self.state.lock().unwrap().1
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        self.gate.state.lock().unwrap().0 -= 1;
        self.gate.freed.notify_one();
    }
}
