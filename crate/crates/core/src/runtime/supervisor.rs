//! Supervision of harness processes: a bounded pool of long-lived workers,
//! each speaking the line protocol over stdin/stdout.

use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use super::protocol::{ExecutionRequest, ExecutionResult};
use crate::problems::FailureKind;

/// How to launch a harness process.
#[derive(Debug, Clone, PartialEq)]
pub struct HarnessCommand {
    pub program: PathBuf,
    pub args: Vec<String>,
    /// Address-space cap applied to the child, in bytes.
    pub memory_limit: Option<u64>,
}

impl HarnessCommand {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        HarnessCommand { program: program.into(), args: Vec::new(), memory_limit: Some(1 << 30) }
    }

    pub fn arg(mut self, a: impl Into<String>) -> Self {
        self.args.push(a.into());
        self
    }

    fn spawn(&self) -> std::io::Result<Child> {
        let mut cmd = Command::new(&self.program);
        cmd.args(&self.args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::null());
        #[cfg(unix)]
        {
            use std::os::unix::process::CommandExt;
            // Own process group, so a kill also reaches anything the harness spawned.
            cmd.process_group(0);
        }
        #[cfg(unix)]
        if let Some(limit) = self.memory_limit {
            use std::os::unix::process::CommandExt;
            // SAFETY: setrlimit is async-signal-safe and touches no parent state.
            unsafe {
                cmd.pre_exec(move || {
                    let lim = libc::rlimit { rlim_cur: limit as libc::rlim_t, rlim_max: limit as libc::rlim_t };
                    if libc::setrlimit(libc::RLIMIT_AS, &lim) != 0 {
                        return Err(std::io::Error::last_os_error());
                    }
                    Ok(())
                });
            }
        }
        cmd.spawn()
    }
}

struct Worker {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<String>,
}

impl Worker {
    fn start(cmd: &HarnessCommand) -> std::io::Result<Self> {
        let mut child = cmd.spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        // Detached: ends by itself once the pipe closes.
        std::thread::Builder::new().name("harness-reader".into()).spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        })?;
        Ok(Worker { child, stdin: Some(stdin), lines })
    }

    fn kill_group(&mut self) {
        #[cfg(unix)]
        if let Ok(pid) = libc::pid_t::try_from(self.child.id()) {
            // SAFETY: plain syscall on the group this worker leads.
            unsafe {
                libc::kill(-pid, libc::SIGKILL);
            }
        }
        let _ = self.child.kill();
    }

    /// Kills and reaps the process.
    fn terminate(mut self) -> Option<std::process::ExitStatus> {
        self.kill_group();
        self.child.wait().ok()
    }

    /// Closes stdin and reaps the process, killing it if it lingers.
    fn shutdown(mut self) {
        drop(self.stdin.take());
        for _ in 0..50 {
            if let Ok(Some(_)) = self.child.try_wait() {
                break;
            }
            std::thread::sleep(Duration::from_millis(2));
        }
        self.kill_group();
        let _ = self.child.wait();
    }
}

/// Runs execution requests on a bounded pool of harness processes. Safe to
/// call from many threads; each in-flight batch owns one process.
pub struct Supervisor {
    cmd: HarnessCommand,
    max_workers: usize,
    idle: Mutex<Vec<Worker>>,
    busy: Mutex<usize>,
    freed: Condvar,
    live: Arc<AtomicUsize>,
    next_id: AtomicU64,
    /// Extra time granted beyond `timeout_ms` before the process is killed.
    pub kill_grace: Duration,
}

impl Supervisor {
    pub fn new(cmd: HarnessCommand, max_workers: usize) -> Self {
        Supervisor {
            cmd,
            max_workers: max_workers.max(1),
            idle: Mutex::new(Vec::new()),
            busy: Mutex::new(0),
            freed: Condvar::new(),
            live: Arc::new(AtomicUsize::new(0)),
            next_id: AtomicU64::new(0),
            kill_grace: Duration::from_millis(250),
        }
    }

    /// Harness processes currently alive (idle or running).
    pub fn live_processes(&self) -> usize {
        self.live.load(Ordering::SeqCst)
    }

    /// Fresh request id, unique within this supervisor.
    pub fn next_request_id(&self) -> String {
        format!("req-{}", self.next_id.fetch_add(1, Ordering::Relaxed))
    }

    fn acquire(&self) {
        let mut busy = self.busy.lock().unwrap();
        while *busy >= self.max_workers {
            busy = self.freed.wait(busy).unwrap();
        }
        *busy += 1;
    }

    fn release(&self) {
        *self.busy.lock().unwrap() -= 1;
        self.freed.notify_one();
    }

    fn checkout(&self) -> std::io::Result<Worker> {
        if let Some(w) = self.idle.lock().unwrap().pop() {
            return Ok(w);
        }
        let w = Worker::start(&self.cmd)?;
        self.live.fetch_add(1, Ordering::SeqCst);
        Ok(w)
    }

    fn discard(&self, w: Worker) -> Option<std::process::ExitStatus> {
        let status = w.terminate();
        self.live.fetch_sub(1, Ordering::SeqCst);
        status
    }

    /// Sends one batch and waits for its response. Never takes longer than
    /// `timeout_ms` plus the kill grace (plus process start-up).
    pub fn execute_batch(&self, req: &ExecutionRequest) -> ExecutionResult {
        self.acquire();
        let out = self.run(req);
        self.release();
        out
    }

    fn run(&self, req: &ExecutionRequest) -> ExecutionResult {
        let fail = |kind, msg: String| ExecutionResult::failure(req.id.clone(), kind, msg);
        let mut w = match self.checkout() {
            Ok(w) => w,
            Err(e) => return fail(FailureKind::ProtocolError, format!("cannot start harness {}: {e}", self.cmd.program.display())),
        };
        let mut line = req.to_line();
        line.push('\n');
        let stdin = w.stdin.as_mut().expect("live worker has stdin");
        if let Err(e) = stdin.write_all(line.as_bytes()).and_then(|_| stdin.flush()) {
            let status = self.discard(w);
            return fail(FailureKind::ProtocolError, format!("harness not accepting input ({e}); exit status {status:?}"));
        }
        let budget = Duration::from_millis(req.timeout_ms) + self.kill_grace;
        match w.lines.recv_timeout(budget) {
            Ok(resp) => match ExecutionResult::from_line(&resp) {
                Ok(r) if r.id == req.id => {
                    if r.objectives.as_ref().is_some_and(|o| o.len() != req.instances.len()) {
                        self.discard(w);
                        return fail(FailureKind::ProtocolError, "objective count does not match instance count".into());
                    }
                    self.idle.lock().unwrap().push(w);
                    r
                }
                Ok(r) => {
                    self.discard(w);
                    fail(FailureKind::ProtocolError, format!("response id {:?} does not match request", r.id))
                }
                Err(e) => {
                    self.discard(w);
                    fail(FailureKind::ProtocolError, e)
                }
            },
            Err(RecvTimeoutError::Timeout) => {
                self.discard(w);
                fail(FailureKind::Timeout, format!("batch exceeded {} ms; harness killed", req.timeout_ms))
            }
            Err(RecvTimeoutError::Disconnected) => {
                let status = self.discard(w);
                fail(FailureKind::ProtocolError, format!("harness exited without responding ({status:?})"))
            }
        }
    }

    /// Stops every idle process. Called on drop as well.
    pub fn shutdown(&self) {
        let workers: Vec<Worker> = std::mem::take(&mut *self.idle.lock().unwrap());
        for w in workers {
            w.shutdown();
            self.live.fetch_sub(1, Ordering::SeqCst);
        }
    }
}

impl Drop for Supervisor {
    fn drop(&mut self) {
        self.shutdown();
    }
}
