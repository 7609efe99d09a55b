//! Minimal line-framed TCP client, used by tools and tests.

use std::io;
use std::net::SocketAddr;
use std::time::Duration;

use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::TcpStream;
use tokio::time::timeout;

use crate::message::{decode, encode_line, Body, Message, Role};

pub struct LineClient {
    reader: BufReader<OwnedReadHalf>,
    writer: OwnedWriteHalf,
    seq: u64,
}

impl LineClient {
    pub async fn connect(addr: SocketAddr) -> io::Result<Self> {
        let stream = TcpStream::connect(addr).await?;
        stream.set_nodelay(true)?;
        let (r, w) = stream.into_split();
        Ok(Self {
            reader: BufReader::new(r),
            writer: w,
            seq: 0,
        })
    }

    /// Connects and greets; returns the server's first reply.
    pub async fn join(addr: SocketAddr, role: Role) -> io::Result<(Self, Message)> {
        let mut c = Self::connect(addr).await?;
        c.send(0, Body::Hello { role }).await?;
        let reply = c.recv_within(Duration::from_secs(5)).await?;
        Ok((c, reply))
    }

    /// Sends `body` with the next sequence number, which is returned.
    pub async fn send(&mut self, tick: u64, body: Body) -> io::Result<u64> {
        self.seq += 1;
        self.send_message(&Message::new(self.seq, tick, body)).await?;
        Ok(self.seq)
    }

    pub async fn send_message(&mut self, msg: &Message) -> io::Result<()> {
        self.send_raw(encode_line(msg).as_bytes()).await
    }

    pub async fn send_raw(&mut self, bytes: &[u8]) -> io::Result<()> {
        self.writer.write_all(bytes).await
    }

    /// Next message, or `None` once the server closes the connection.
    pub async fn recv(&mut self) -> io::Result<Option<Message>> {
        let mut line = String::new();
        if self.reader.read_line(&mut line).await? == 0 {
            return Ok(None);
        }
        decode(line.as_bytes())
            .map(Some)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    pub async fn recv_within(&mut self, wait: Duration) -> io::Result<Message> {
        match timeout(wait, self.recv()).await {
            Ok(Ok(Some(m))) => Ok(m),
            Ok(Ok(None)) => Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(Err(e)) => Err(e),
            Err(_) => Err(io::ErrorKind::TimedOut.into()),
        }
    }

    /// Skips messages until one satisfies `pred`.
    pub async fn wait_for(&mut self, wait: Duration, mut pred: impl FnMut(&Message) -> bool) -> io::Result<Message> {
        let deadline = tokio::time::Instant::now() + wait;
        loop {
            let left = deadline.saturating_duration_since(tokio::time::Instant::now());
            let m = self.recv_within(left).await?;
            if pred(&m) {
                return Ok(m);
            }
        }
    }
}
