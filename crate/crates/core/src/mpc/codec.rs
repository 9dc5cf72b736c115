use num_bigint::BigUint;

use super::Word;

/// Number of machine words a value occupies.
pub trait WordLen {
    fn word_len(&self) -> usize;
}

/// Values that can travel in messages.
pub trait WordCodec: WordLen + Sized {
    fn encode(&self, out: &mut Vec<Word>);
    /// Inverse of `encode` on exactly the words it produced.
    fn decode(words: &[Word]) -> Self;
}

macro_rules! scalar {
    ($($t:ty),*) => {$(
        impl WordLen for $t {
            fn word_len(&self) -> usize { 1 }
        }
        impl WordCodec for $t {
            fn encode(&self, out: &mut Vec<Word>) { out.push(*self as Word) }
            fn decode(words: &[Word]) -> Self { words[0] as $t }
        }
    )*};
}
scalar!(u64, u32, usize);

impl WordLen for i64 {
    fn word_len(&self) -> usize {
        1
    }
}

impl WordCodec for i64 {
    fn encode(&self, out: &mut Vec<Word>) {
        out.push(*self as Word)
    }
    fn decode(words: &[Word]) -> Self {
        words[0] as i64
    }
}

impl WordLen for bool {
    fn word_len(&self) -> usize {
        1
    }
}

impl WordCodec for bool {
    fn encode(&self, out: &mut Vec<Word>) {
        out.push(u64::from(*self))
    }
    fn decode(words: &[Word]) -> Self {
        words[0] != 0
    }
}

impl WordLen for f64 {
    fn word_len(&self) -> usize {
        1
    }
}

impl WordCodec for f64 {
    fn encode(&self, out: &mut Vec<Word>) {
        out.push(self.to_bits())
    }
    fn decode(words: &[Word]) -> Self {
        f64::from_bits(words[0])
    }
}

/// Big integers take one word per 64-bit limb, at least one.
impl WordLen for BigUint {
    fn word_len(&self) -> usize {
        (self.bits() as usize).div_ceil(64).max(1)
    }
}

impl WordCodec for BigUint {
    fn encode(&self, out: &mut Vec<Word>) {
        let digits = self.to_u64_digits();
        if digits.is_empty() {
            out.push(0);
        } else {
            out.extend(digits);
        }
    }
    fn decode(words: &[Word]) -> Self {
        let mut bytes = Vec::with_capacity(words.len() * 8);
        for w in words {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
        BigUint::from_bytes_le(&bytes)
    }
}

impl<A: WordLen, B: WordLen> WordLen for (A, B) {
    fn word_len(&self) -> usize {
        self.0.word_len() + self.1.word_len()
    }
}

/// Decoding assumes the second component occupies one word.
impl<A: WordCodec, B: WordCodec> WordCodec for (A, B) {
    fn encode(&self, out: &mut Vec<Word>) {
        self.0.encode(out);
        self.1.encode(out);
    }
    fn decode(words: &[Word]) -> Self {
        let split = words.len() - 1;
        (A::decode(&words[..split]), B::decode(&words[split..]))
    }
}

impl<T: WordLen> WordLen for Vec<T> {
    fn word_len(&self) -> usize {
        self.iter().map(WordLen::word_len).sum()
    }
}

impl WordCodec for Vec<u64> {
    fn encode(&self, out: &mut Vec<Word>) {
        out.extend_from_slice(self)
    }
    fn decode(words: &[Word]) -> Self {
        words.to_vec()
    }
}
