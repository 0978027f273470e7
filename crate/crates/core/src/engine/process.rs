/// Handle to a registered simulation process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProcessId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessState {
    Idle,
    Running,
    Waiting,
    Finished,
}

#[derive(Debug)]
pub struct Process {
    pub name: String,
    pub state: ProcessState,
    /// Events delivered to this process so far.
    pub delivered: u64,
}

/// Registry of simulated processes. A finished process receives no further
/// events; anything still in flight for it is dropped and counted.
#[derive(Debug, Default)]
pub struct ProcessRegistry {
    slots: Vec<Process>,
}

impl ProcessRegistry {
    pub fn spawn(&mut self, name: impl Into<String>) -> ProcessId {
        let id = ProcessId(self.slots.len() as u32);
        self.slots.push(Process { name: name.into(), state: ProcessState::Idle, delivered: 0 });
        id
    }

    pub fn get(&self, id: ProcessId) -> &Process {
        &self.slots[id.0 as usize]
    }

    pub fn set_state(&mut self, id: ProcessId, state: ProcessState) {
        self.slots[id.0 as usize].state = state;
    }

    pub fn finish(&mut self, id: ProcessId) {
        self.set_state(id, ProcessState::Finished);
    }

    pub fn is_finished(&self, id: ProcessId) -> bool {
        self.slots[id.0 as usize].state == ProcessState::Finished
    }

    pub fn note_delivery(&mut self, id: ProcessId) {
        self.slots[id.0 as usize].delivered += 1;
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}
