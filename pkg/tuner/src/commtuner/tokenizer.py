"""Byte-level tokenizer: ids 0-255 are raw UTF-8 bytes plus four specials.

No vocabulary to fit or download, which keeps desk-scale runs fully offline
and makes round-trips exact for any text.
"""

from __future__ import annotations

PAD = 256
BOS = 257
SEP = 258
EOS = 259
VOCAB_SIZE = 260

IGNORE_INDEX = -100


class ByteTokenizer:
    vocab_size = VOCAB_SIZE
    pad_id = PAD
    bos_id = BOS
    sep_id = SEP
    eos_id = EOS

    def encode(self, text: str) -> list[int]:
        return list(text.encode("utf-8"))

    def decode(self, ids) -> str:
        return bytes(i for i in ids if 0 <= i < 256).decode("utf-8", errors="replace")

    def encode_example(
        self, prompt: str, completion: str, max_len: int
    ) -> tuple[list[int], list[int]]:
        """Token ids plus labels; the prompt region is masked out of the loss."""
        ids = [BOS] + self.encode(prompt) + [SEP] + self.encode(completion) + [EOS]
        sep_pos = 1 + len(self.encode(prompt))
        labels = [IGNORE_INDEX] * (sep_pos + 1) + ids[sep_pos + 1 :]
        ids = ids[:max_len]
        labels = labels[:max_len]
        return ids, labels
