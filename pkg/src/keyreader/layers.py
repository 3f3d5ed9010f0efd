"""Neural building blocks shared by the rewriting model, the reader and the scorer."""
import numpy as np

from . import tensor as T


class ParamStore:
    """Ordered registry of named parameters with seeded initialisation.

    Weight matrices are Glorot-uniform, biases start at zero. Tensors added with
    ``trainable=False`` are kept (and checkpointed) but never handed to the optimiser.
    """

    def __init__(self, seed=0):
        self.rng = np.random.default_rng(seed)
        self.tensors = {}
        self.frozen = set()

    def _register(self, name, value, trainable):
        if name in self.tensors:
            raise KeyError(f"duplicate parameter {name!r}")
        t = T.Tensor(value, requires_grad=trainable, name=name)
        self.tensors[name] = t
        if not trainable:
            self.frozen.add(name)
        return t

    def weight(self, name, fan_in, fan_out):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return self._register(name, self.rng.uniform(-bound, bound, size=(fan_in, fan_out)), True)

    def vector(self, name, n):
        # weight vectors projecting to a scalar: fan_out = 1
        bound = np.sqrt(6.0 / (n + 1))
        return self._register(name, self.rng.uniform(-bound, bound, size=n), True)

    def bias(self, name, n):
        return self._register(name, np.zeros(n), True)

    def add(self, name, value, trainable=True):
        return self._register(name, np.asarray(value, dtype=np.float64), trainable)

    def trainable(self, prefix=""):
        return {k: t for k, t in self.tensors.items() if k not in self.frozen and k.startswith(prefix)}

    def arrays(self):
        return {k: t.data for k, t in self.tensors.items()}

    def __getitem__(self, name):
        return self.tensors[name]

    def __contains__(self, name):
        return name in self.tensors


# --- character CNN ----------------------------------------------------------

PAD_CHAR = 0
UNK_CHAR = 1


class CharVocab:
    def __init__(self, chars=()):
        self.chars = ["<pad>", "<unk>"] + sorted(set(chars))
        self.index = {c: i for i, c in enumerate(self.chars)}

    @classmethod
    def from_tokens(cls, tokens):
        return cls({c for tok in tokens for c in tok})

    def __len__(self):
        return len(self.chars)

    def encode(self, word):
        return [self.index.get(c, UNK_CHAR) for c in word]


class CharCNN:
    """Embed characters, convolve ``filters`` kernels of a fixed width, max-pool, add bias, tanh."""

    def __init__(self, store, prefix, n_chars, char_dim=16, filters=100, width=5):
        self.width = width
        self.filters = filters
        self.table = store.weight(f"{prefix}/char_emb", n_chars, char_dim)
        self.kernel = store.weight(f"{prefix}/kernel", width * char_dim, filters)
        self.bias = store.bias(f"{prefix}/bias", filters)
        self.char_dim = char_dim

    def pad(self, char_ids):
        ids = list(char_ids)
        if len(ids) < self.width:
            ids += [PAD_CHAR] * (self.width - len(ids))
        return ids

    def __call__(self, words):
        """``words``: list of char-id lists. Returns ``len(words) x filters``."""
        padded = [self.pad(w) for w in words]
        groups = {}
        for k, ids in enumerate(padded):
            groups.setdefault(len(ids), []).append(k)
        pooled, order = [], []
        for length in sorted(groups):
            members = groups[length]
            positions = length - self.width + 1
            ids = np.array([padded[k] for k in members])
            windows = np.stack([ids[:, p:p + self.width] for p in range(positions)], axis=1)
            emb = T.embedding(self.table, windows)  # G x P x width x d_c
            flat = T.reshape(emb, (len(members) * positions, self.width * self.char_dim))
            conv = T.reshape(flat @ self.kernel, (len(members), positions, self.filters))
            pooled.append(T.max(conv, axis=1))
            order.extend(members)
        stacked = pooled[0] if len(pooled) == 1 else T.concat(pooled, axis=0)
        inverse = np.argsort(np.array(order))
        rows = T.embedding(stacked, inverse)
        return T.tanh(rows + T.tile(self.bias, len(words)))


# --- recurrent layers -------------------------------------------------------


def _sig(x):
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def lstm_sequence(X, W, b, reverse=False):
    """Run an LSTM over the rows of ``X`` from zero state; returns ``n x H`` hidden states.

    One graph node: the forward pass is a numpy loop and the backward pass is
    hand-written backpropagation through time. Gate layout in ``W`` and ``b`` is
    input, forget, output, candidate.
    """
    xd = X.data[::-1] if reverse else X.data
    Wd, bd = W.data, b.data
    n, d = xd.shape
    H = bd.shape[0] // 4
    if Wd.shape != (d + H, 4 * H):
        raise T.ContractViolation(f"lstm: weight shape {list(Wd.shape)} vs input dim {d}, hidden {H}")
    hs = np.zeros((n + 1, H))
    cs = np.zeros((n + 1, H))
    gates = np.empty((n, 4 * H))
    Wx, Wh = Wd[:d], Wd[d:]
    xproj = xd @ Wx + bd
    for t in range(n):
        z = xproj[t] + hs[t] @ Wh
        i, f, o = _sig(z[:H]), _sig(z[H:2 * H]), _sig(z[2 * H:3 * H])
        g = np.tanh(z[3 * H:])
        cs[t + 1] = f * cs[t] + i * g
        hs[t + 1] = o * np.tanh(cs[t + 1])
        gates[t, :H], gates[t, H:2 * H], gates[t, 2 * H:3 * H], gates[t, 3 * H:] = i, f, o, g
    out = hs[1:][::-1] if reverse else hs[1:]

    def bw(G):
        G = G[::-1] if reverse else G
        dz = np.empty((n, 4 * H))
        dh_next = np.zeros(H)
        dc_next = np.zeros(H)
        for t in range(n - 1, -1, -1):
            i, f, o, g = gates[t, :H], gates[t, H:2 * H], gates[t, 2 * H:3 * H], gates[t, 3 * H:]
            tc = np.tanh(cs[t + 1])
            dh = G[t] + dh_next
            dc = dh * o * (1.0 - tc * tc) + dc_next
            dz[t, :H] = dc * g * i * (1.0 - i)
            dz[t, H:2 * H] = dc * cs[t] * f * (1.0 - f)
            dz[t, 2 * H:3 * H] = dh * tc * o * (1.0 - o)
            dz[t, 3 * H:] = dc * i * (1.0 - g * g)
            dc_next = dc * f
            dh_next = dz[t] @ Wh.T
        dX = dz @ Wx.T
        dW = np.concatenate([xd.T @ dz, hs[:-1].T @ dz], axis=0)
        db = dz.sum(axis=0)
        return (dX[::-1] if reverse else dX), dW, db

    return T.make_node(out, (X, W, b), bw)


def lstm_cell(x, h, c, W, b):
    """Single LSTM step from primitive ops; returns ``(h_new, c_new)``."""
    H = h.shape[0]
    z = T.concat([x, h]) @ W + b
    i = T.sigmoid(z[:H])
    f = T.sigmoid(z[H:2 * H])
    o = T.sigmoid(z[2 * H:3 * H])
    g = T.tanh(z[3 * H:])
    c_new = f * c + i * g
    return o * T.tanh(c_new), c_new


def lstm_sequence_reference(X, W, b, reverse=False):
    """Unfused LSTM built from primitive ops; the oracle for :func:`lstm_sequence`."""
    n = X.shape[0]
    H = b.shape[0] // 4
    h = T.constant(np.zeros(H))
    c = T.constant(np.zeros(H))
    steps = range(n - 1, -1, -1) if reverse else range(n)
    outs = {}
    for t in steps:
        h, c = lstm_cell(X[t], h, c, W, b)
        outs[t] = T.reshape(h, (1, H))
    return T.concat([outs[t] for t in range(n)], axis=0)


class LSTMParams:
    def __init__(self, store, prefix, in_dim, hidden):
        self.W = store.weight(f"{prefix}/W", in_dim + hidden, 4 * hidden)
        self.b = store.bias(f"{prefix}/b", 4 * hidden)
        self.hidden = hidden


class BiLSTM:
    def __init__(self, store, prefix, in_dim, hidden=100, dropout=0.0):
        self.fwd = LSTMParams(store, f"{prefix}/fwd", in_dim, hidden)
        self.bwd = LSTMParams(store, f"{prefix}/bwd", in_dim, hidden)
        self.in_dim = in_dim
        self.hidden = hidden
        self.dropout = dropout

    @property
    def out_dim(self):
        return 2 * self.hidden

    def __call__(self, X, training=False, rng=None):
        if X.shape[0] == 0:
            raise T.ContractViolation("bilstm: empty sequence")
        X = T.dropout(X, self.dropout, rng, training)
        f = lstm_sequence(X, self.fwd.W, self.fwd.b)
        r = lstm_sequence(X, self.bwd.W, self.bwd.b, reverse=True)
        return T.concat([f, r], axis=1)

    def summary(self, X, training=False, rng=None):
        """Concatenated final hidden states of both directions."""
        out = self(X, training, rng)
        H = self.hidden
        return T.concat([out[-1, :H], out[0, H:]])


# --- matching and attention -------------------------------------------------


class Match:
    """``match(x, y) = v . tanh(W [x; y; x*y])``, optionally projecting ``x`` to ``y``'s width first."""

    def __init__(self, store, prefix, dim, x_dim=None, inner=None):
        inner = inner or dim
        self.dim = dim
        self.W = store.weight(f"{prefix}/W", 3 * dim, inner)
        self.v = store.vector(f"{prefix}/v", inner)
        self.proj = None
        if x_dim is not None and x_dim != dim:
            self.proj = store.weight(f"{prefix}/proj", x_dim, dim)
        self.x_dim = x_dim if x_dim is not None else dim

    def _project(self, x):
        if self.proj is not None:
            return x @ self.proj
        return x

    def __call__(self, x, y):
        if x.shape[-1] != self.x_dim or y.shape[-1] != self.dim:
            raise T.ContractViolation(f"match: dim mismatch {list(x.shape)} vs {list(y.shape)}")
        x = self._project(x)
        return T.tanh(T.concat([x, y, x * y]) @ self.W) @ self.v

    def against(self, x, Y):
        """Scores of one vector ``x`` against every row of ``Y``."""
        x = self._project(x)
        Xr = T.tile(x, Y.shape[0])
        return T.tanh(T.concat([Xr, Y, Xr * Y], axis=1) @ self.W) @ self.v

    def matrix(self, X, Y):
        """``m x n`` scores for all row pairs of ``X`` (m rows) and ``Y`` (n rows)."""
        if X.shape[-1] != self.x_dim or Y.shape[-1] != self.dim:
            raise T.ContractViolation(f"match: dim mismatch {list(X.shape)} vs {list(Y.shape)}")
        X = self._project(X)
        m, n = X.shape[0], Y.shape[0]
        Xr = T.embedding(X, np.repeat(np.arange(m), n))
        Yr = T.embedding(Y, np.tile(np.arange(n), m))
        flat = T.tanh(T.concat([Xr, Yr, Xr * Yr], axis=1) @ self.W) @ self.v
        return T.reshape(flat, (m, n))


def attend(scores, values):
    """Softmax the scores, then take the weighted sum of ``values`` rows."""
    return T.softmax(scores) @ values


# --- token embedding --------------------------------------------------------


class WordEmbedder:
    """Frozen word table plus trainable vectors for the special symbols.

    The frozen table's special rows must be zero; special ids read from the
    trainable table instead.
    """

    def __init__(self, store, prefix, table_name, n_special=3):
        self.table = store[table_name]
        self.n_special = n_special
        dim = self.table.shape[1]
        self.special = store.add(f"{prefix}/special_emb", store.rng.normal(0.0, 0.1, size=(n_special, dim)))

    @property
    def dim(self):
        return self.table.shape[1]

    def __call__(self, ids):
        ids = np.asarray(ids, dtype=np.int64)
        out = T.embedding(self.table, ids)
        mask = ids < self.n_special
        if mask.any():
            sp = T.embedding(self.special, np.where(mask, ids, 0))
            out = out + sp * T.constant(np.repeat(mask[:, None].astype(float), self.dim, axis=1))
        return out


class TokenEmbedder:
    """``[word; char-cnn]`` rows for a token list."""

    def __init__(self, store, prefix, word_vocab, char_vocab, table_name, char_dim=16, filters=100, width=5):
        self.word_vocab = word_vocab
        self.char_vocab = char_vocab
        self.words = WordEmbedder(store, prefix, table_name)
        self.chars = CharCNN(store, f"{prefix}/char_cnn", len(char_vocab), char_dim, filters, width)

    @property
    def dim(self):
        return self.words.dim + self.chars.filters

    def __call__(self, tokens):
        w = self.words(self.word_vocab.encode(tokens))
        c = self.chars([self.char_vocab.encode(t) for t in tokens])
        return T.concat([w, c], axis=1)
