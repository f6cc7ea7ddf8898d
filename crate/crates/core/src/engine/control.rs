//! Run control shared between a run and whoever steers it.

use std::sync::{Arc, Condvar, Mutex};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlSignal {
    Run,
    Pause,
    Cancel,
}

#[derive(Debug)]
struct Inner {
    signal: ControlSignal,
    /// The generator is blocked waiting for the pause to lift.
    parked: bool,
}

/// Cloneable handle; every clone steers the same run. Signals take effect
/// at task boundaries.
#[derive(Debug, Clone)]
pub struct Control {
    inner: Arc<(Mutex<Inner>, Condvar)>,
}

impl Default for Control {
    fn default() -> Self {
        Control {
            inner: Arc::new((
                Mutex::new(Inner {
                    signal: ControlSignal::Run,
                    parked: false,
                }),
                Condvar::new(),
            )),
        }
    }
}

impl Control {
    pub fn new() -> Self {
        Self::default()
    }

    fn set(&self, to: ControlSignal) -> bool {
        let (lock, cv) = &*self.inner;
        let mut g = lock.lock().unwrap();
        if g.signal == ControlSignal::Cancel {
            return to == ControlSignal::Cancel;
        }
        g.signal = to;
        cv.notify_all();
        true
    }

    /// Stops dispatching new tasks. False once cancelled.
    pub fn pause(&self) -> bool {
        self.set(ControlSignal::Pause)
    }

    /// False once cancelled.
    pub fn resume(&self) -> bool {
        self.set(ControlSignal::Run)
    }

    /// Irreversible.
    pub fn cancel(&self) {
        self.set(ControlSignal::Cancel);
    }

    pub fn signal(&self) -> ControlSignal {
        self.inner.0.lock().unwrap().signal
    }

    pub fn is_cancelled(&self) -> bool {
        self.signal() == ControlSignal::Cancel
    }

    /// Blocks while paused; returns `Run` or `Cancel`.
    pub(crate) fn wait_while_paused(&self) -> ControlSignal {
        let (lock, cv) = &*self.inner;
        let mut g = lock.lock().unwrap();
        while g.signal == ControlSignal::Pause {
            g.parked = true;
            g = cv.wait(g).unwrap();
        }
        g.parked = false;
        g.signal
    }

    /// Paused with the generator blocked, so no further task will start.
    pub(crate) fn is_parked(&self) -> bool {
        let g = self.inner.0.lock().unwrap();
        g.parked && g.signal == ControlSignal::Pause
    }
}
