//! Dense `[user][bs][sub-channel]` storage shared by the channel, association
//! and power tensors.

use serde::{Deserialize, Serialize};

/// Problem dimensions: `users` (N), `bss` (M) and `subchannels` (K).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub users: usize,
    pub bss: usize,
    pub subchannels: usize,
}

impl Dims {
    pub fn new(users: usize, bss: usize, subchannels: usize) -> Self {
        Self {
            users,
            bss,
            subchannels,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.users * self.bss * self.subchannels
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, user: usize, bs: usize, sub: usize) -> usize {
        debug_assert!(user < self.users && bs < self.bss && sub < self.subchannels);
        (user * self.bss + bs) * self.subchannels + sub
    }
}

/// Row-major 3-D array indexed by `(user, bs, sub-channel)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3<T> {
    dims: Dims,
    data: Vec<T>,
}

impl<T: Clone> Tensor3<T> {
    pub fn filled(dims: Dims, value: T) -> Self {
        Self {
            dims,
            data: vec![value; dims.len()],
        }
    }
}

impl<T> Tensor3<T> {
    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(dims.len());
        for i in 0..dims.users {
            for j in 0..dims.bss {
                for k in 0..dims.subchannels {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { dims, data }
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn get(&self, user: usize, bs: usize, sub: usize) -> &T {
        &self.data[self.dims.index(user, bs, sub)]
    }

    #[inline]
    pub fn get_mut(&mut self, user: usize, bs: usize, sub: usize) -> &mut T {
        let idx = self.dims.index(user, bs, sub);
        &mut self.data[idx]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// All `(bs, sub)` cells of one user, BS-major.
    pub fn user_slice(&self, user: usize) -> &[T] {
        let stride = self.dims.bss * self.dims.subchannels;
        &self.data[user * stride..(user + 1) * stride]
    }
}

impl<T: Copy> Tensor3<T> {
    #[inline]
    pub fn at(&self, user: usize, bs: usize, sub: usize) -> T {
        self.data[self.dims.index(user, bs, sub)]
    }

    #[inline]
    pub fn set(&mut self, user: usize, bs: usize, sub: usize, value: T) {
        let idx = self.dims.index(user, bs, sub);
        self.data[idx] = value;
    }
}
