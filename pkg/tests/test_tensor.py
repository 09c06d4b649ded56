import json
import threading

import numpy as np
from pytest import raises, approx

from ncwno.exceptions import NumericalError
from ncwno.tensor import (Tensor, Graph, backward, no_grad, is_grad_enabled, check_gradients, concatenate, stack,
                          pad, broadcast_to, sqrt, exp, einsum, pointwise_channel_mix, conv2d, adaptive_avg_pool2d,
                          mish, softmax_over_axis, AdamState, Adam, adam_step, clip_grad_norm, step_lr_schedule,
                          save_tensors, load_tensors)

rng = np.random.default_rng(0)
a = rng.standard_normal((3, 4))
b = rng.standard_normal((3, 4))
c = rng.standard_normal(4)
v = rng.standard_normal((2, 5, 3))
w = rng.standard_normal((3, 4))
images = rng.standard_normal((2, 7, 6, 2))
kernel = rng.standard_normal((3, 3, 2, 4))

TOL = 1e-6


class TestBackward:
    def test_scalar_chain(self):
        x = Tensor(2., requires_grad=True)
        y = Tensor(3., requires_grad=True)
        backward(x * y + x * x)
        assert x.grad == approx(2 * 2 + 3)
        assert y.grad == approx(2)

    def test_accumulation(self):
        x = Tensor(np.ones(3), requires_grad=True)
        backward((x * 2.).sum())
        backward((x * 3.).sum())
        assert np.allclose(x.grad, 5)
        x.zero_grad()
        assert x.grad is None

    def test_shared_subexpression(self):
        x = Tensor(np.arange(3.), requires_grad=True)
        y = x * x
        backward((y + y).sum())
        assert np.allclose(x.grad, 4 * np.arange(3.))

    def test_broadcast_gradients(self):
        x = Tensor(a, requires_grad=True)
        y = Tensor(c, requires_grad=True)
        backward((x * y).sum())
        assert y.grad.shape == c.shape
        assert np.allclose(y.grad, a.sum(axis=0))

    def test_non_scalar_loss(self):
        with raises(ValueError):
            backward(Tensor(np.ones(2), requires_grad=True) * 2.)
        with raises(TypeError):
            backward(np.ones(1))

    def test_untracked_inputs(self):
        x = Tensor(a)
        y = Tensor(b, requires_grad=True)
        touched = backward((x * y).sum())
        assert touched == [y]
        assert x.grad is None

    def test_cycle(self):
        x = Tensor(1., requires_grad=True)
        y = x * 2.
        z = y * 3.
        y._parents = (z,)
        with raises(ValueError):
            Graph.from_output(z)

    def test_graph_order(self):
        x = Tensor(a, requires_grad=True)
        y = (x * 2.).sum()
        graph = Graph.from_output(y)
        assert graph.nodes[-1] is y
        assert graph.leaves == [x]


class TestNoGrad:
    def test_no_graph(self):
        x = Tensor(a, requires_grad=True)
        with no_grad():
            assert not is_grad_enabled()
            y = x * 2.
        assert is_grad_enabled()
        assert not y.requires_grad
        assert y.is_leaf

    def test_thread_local(self):
        seen = []

        def worker():
            seen.append(is_grad_enabled())

        with no_grad():
            thread = threading.Thread(target=worker)
            thread.start()
            thread.join()
        assert seen == [True]


class TestGradients:
    def test_arithmetic(self):
        assert check_gradients(lambda x, y: x * y - x / (y * y + 1.) + (-x), [a, b]) < TOL
        assert check_gradients(lambda x, y: (x + y).sum(axis=0) * x.mean(axis=0), [a, c]) < TOL

    def test_shape_ops(self):
        assert check_gradients(lambda x: x.reshape(4, 3).transpose(1, 0), [a]) < TOL
        assert check_gradients(lambda x: x[1:, ::2], [a]) < TOL
        assert check_gradients(lambda x: x[[0, 0, 2]], [a]) < TOL
        assert check_gradients(lambda x, y: concatenate([x, y], axis=1), [a, b]) < TOL
        assert check_gradients(lambda x, y: stack([x, y], axis=0), [a, b]) < TOL
        assert check_gradients(lambda x: pad(x, [(1, 2), (0, 1)]), [a]) < TOL
        assert check_gradients(lambda x: broadcast_to(x, (3, 4)), [c]) < TOL

    def test_pointwise(self):
        positive = np.abs(a) + 0.5
        assert check_gradients(sqrt, [positive]) < TOL
        assert check_gradients(exp, [a]) < TOL
        assert check_gradients(mish, [3 * a]) < TOL

    def test_softmax(self):
        assert check_gradients(lambda x: softmax_over_axis(x, axis=0), [a]) < TOL
        assert check_gradients(lambda x: softmax_over_axis(x, axis=-1), [v]) < TOL

    def test_einsum(self):
        assert check_gradients(lambda x, k: einsum('bxi,io->bxo', x, k), [v, w]) < TOL
        kappa = rng.standard_normal((5, 3, 3))
        assert check_gradients(lambda x, k: einsum('bxi,xio->bxo', x, k), [v, kappa]) < TOL

    def test_channel_mix(self):
        bias = rng.standard_normal(4)
        assert check_gradients(pointwise_channel_mix, [v, w, bias]) < TOL

    def test_conv2d(self):
        bias = rng.standard_normal(4)
        for stride, padding in [(1, 0), (2, 1), (1, 2)]:
            assert check_gradients(lambda x, k, b: conv2d(x, k, b, stride=stride, padding=padding),
                                   [images, kernel, bias]) < TOL

    def test_pool(self):
        assert check_gradients(lambda x: adaptive_avg_pool2d(x, (2, 2)), [images]) < TOL
        assert check_gradients(lambda x: adaptive_avg_pool2d(x, (3, 4)), [images]) < TOL


class TestOps:
    def test_softmax_normalized(self):
        y = softmax_over_axis(Tensor(1e3 * a), axis=0)
        assert np.all(np.isfinite(y.data))
        assert np.allclose(y.data.sum(axis=0), 1)
        with raises(ValueError):
            softmax_over_axis(Tensor(a), axis=2)

    def test_mish_values(self):
        assert mish(Tensor(0.)).item() == approx(0)
        assert mish(Tensor(50.)).item() == approx(50)
        assert mish(Tensor(-50.)).item() == approx(0, abs=1e-12)

    def test_einsum_matches_numpy(self):
        assert np.allclose(einsum('bxi,io->bxo', Tensor(v), Tensor(w)).data, np.einsum('bxi,io->bxo', v, w))
        with raises(ValueError):
            einsum('ii->i', Tensor(np.eye(3)))

    def test_channel_mix_mismatch(self):
        with raises(ValueError):
            pointwise_channel_mix(Tensor(v), Tensor(np.ones((4, 2))))

    def test_conv2d_shape(self):
        out = conv2d(Tensor(images), Tensor(kernel), stride=2, padding=1)
        assert out.shape == (2, 4, 3, 4)
        expected = sum(images[0, i, j] @ kernel[i, j] for i in range(3) for j in range(3))
        assert np.allclose(conv2d(Tensor(images), Tensor(kernel)).data[0, 0, 0], expected)

    def test_pool_values(self):
        out = adaptive_avg_pool2d(Tensor(images), (1, 1))
        assert np.allclose(out.data[:, 0, 0], images.mean(axis=(1, 2)))

    def test_dtype_preserved(self):
        x = Tensor(a.astype(np.float32), requires_grad=True)
        y = (x * 2 + 1).sum()
        backward(y)
        assert y.dtype == np.float32
        assert x.grad.dtype == np.float32


class TestOptim:
    def test_adam_first_step(self):
        state = AdamState(lr=0.1, weight_decay=0.)
        params = adam_step({'w': np.array([1., -1.])}, {'w': np.array([0.5, -2.])}, state)
        # the first bias-corrected step moves every entry by lr against the gradient sign
        assert np.allclose(params['w'], [0.9, -0.9])
        assert state.t == 1

    def test_adam_skips_missing(self):
        state = AdamState()
        theta = np.ones(2)
        params = adam_step({'w': theta}, {'w': None}, state)
        assert params['w'] is theta
        with raises(ValueError):
            adam_step({'w': theta}, {'w': np.ones(3)}, state)

    def test_adam_converges(self):
        x = Tensor(np.array([3., -2.]), requires_grad=True)
        optimizer = Adam({'x': x}, lr=0.1, weight_decay=0.)
        for _ in range(500):
            optimizer.zero_grad()
            backward((x * x).sum())
            optimizer.step()
        assert np.abs(x.data).max() < 5e-2

    def test_clip(self):
        grads, norm = clip_grad_norm({'a': np.array([3., 4.]), 'b': None}, 1.)
        assert norm == approx(5)
        assert np.allclose(grads['a'], [0.6, 0.8])
        assert grads['b'] is None
        with raises(AssertionError):
            clip_grad_norm({}, 0)

    def test_schedule(self):
        assert step_lr_schedule(0, 1e-3, 20, 0.5) == approx(1e-3)
        assert step_lr_schedule(19, 1e-3, 20, 0.5) == approx(1e-3)
        assert step_lr_schedule(20, 1e-3, 20, 0.5) == approx(5e-4)
        assert step_lr_schedule(45, 1e-3, 20, 0.5) == approx(2.5e-4)
        with raises(AssertionError):
            step_lr_schedule(0, 1e-3, 0, 0.5)


class TestIo:
    def test_round_trip(self, tmp_path):
        tensors = {'a': a, 'b.c': np.arange(6, dtype=np.float32).reshape(2, 3), 'scalar': np.float64(2.5)}
        save_tensors(tmp_path / 'ckpt', tensors, metadata={'step': 3})
        loaded, metadata = load_tensors(tmp_path / 'ckpt')
        assert list(loaded) == ['a', 'b.c', 'scalar']
        assert metadata == {'step': 3}
        for name, value in tensors.items():
            assert np.array_equal(loaded[name], value)
            assert loaded[name].dtype == np.asarray(value).dtype
        with raises(ValueError):
            loaded['a'][0, 0] = 1.
        writable, _ = load_tensors(tmp_path / 'ckpt', read_only=False)
        writable['a'][0, 0] = 1.

    def test_deterministic_bytes(self, tmp_path):
        save_tensors(tmp_path / 'x', {'a': a, 't': Tensor(b)})
        save_tensors(tmp_path / 'y', {'a': a, 't': Tensor(b)})
        assert (tmp_path / 'x.json').read_bytes() == (tmp_path / 'y.json').read_bytes()
        for name in ('a.bin', 't.bin'):
            assert (tmp_path / 'x.tensors' / name).read_bytes() == (tmp_path / 'y.tensors' / name).read_bytes()

    def test_blob_per_tensor(self, tmp_path):
        save_tensors(tmp_path / 'x', {'a': a, 'b.c': np.arange(3, dtype='>i4')})
        assert sorted(p.name for p in (tmp_path / 'x.tensors').iterdir()) == ['a.bin', 'b.c.bin']
        assert (tmp_path / 'x.tensors' / 'a.bin').read_bytes() == a.astype('<f8').tobytes()
        assert (tmp_path / 'x.tensors' / 'b.c.bin').read_bytes() == np.arange(3, dtype='<i4').tobytes()
        entries = json.loads((tmp_path / 'x.json').read_text(encoding='utf-8'))['tensors']
        assert [(e['name'], e['shape'], e['offset']) for e in entries] == [('a', [3, 4], 0), ('b.c', [3], 0)]

    def test_not_finite(self, tmp_path):
        with raises(NumericalError):
            save_tensors(tmp_path / 'x', {'a': a, 'b': np.array([1., np.nan])})
        with raises(NumericalError):
            save_tensors(tmp_path / 'x', {'b': Tensor(np.array([np.inf]))})
        assert not (tmp_path / 'x.json').exists()

    def test_truncated(self, tmp_path):
        save_tensors(tmp_path / 'x', {'a': a})
        blob = tmp_path / 'x.tensors' / 'a.bin'
        blob.write_bytes(blob.read_bytes()[:-8])
        with raises(ValueError):
            load_tensors(tmp_path / 'x')
