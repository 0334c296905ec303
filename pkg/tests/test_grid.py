import numpy as np
import pytest

from bernoulli_diffuse.errors import ContractError, ValidationError
from bernoulli_diffuse.grid import (BC, Domain, Grid2D, clip01, laplacian, laplacian_dirichlet,
                                    laplacian_periodic, norm_inf, norm_l2, read_csv, write_csv)


def naive_periodic(a):
    ny, nx = a.shape
    out = np.empty_like(a)
    for j in range(ny):
        for i in range(nx):
            out[j, i] = (a[j, (i + 1) % nx] + a[j, (i - 1) % nx] + a[(j + 1) % ny, i]
                         + a[(j - 1) % ny, i] - 4 * a[j, i])
    return out


def test_single_interior_point():
    g = Grid2D(1, 1, 1.0, [1.0])
    assert laplacian_dirichlet(g).data.tolist() == [-4.0]


def test_constant_field_3x3():
    c = 2.5
    out = laplacian_dirichlet(Grid2D.from_array(np.full((3, 3), c))).array
    assert out[1, 1] == 0
    assert out[0, 1] == out[1, 0] == out[2, 1] == out[1, 2] == -c
    assert out[0, 0] == out[2, 2] == -2 * c


def test_dirichlet_eigenfunction():
    d = Domain.unit_square(15)
    x, y = d.coordinates()
    phi = np.sin(np.pi * x) * np.sin(np.pi * y)
    lam = 8 / d.h ** 2 * np.sin(np.pi * d.h / 2) ** 2
    out = laplacian_dirichlet(d.grid(phi)).array
    assert np.max(np.abs(out + lam * phi)) < 1e-12


def test_periodic_constant_and_impulse():
    g = Grid2D.from_array(np.full((4, 5), 0.3), bc=BC.PERIODIC)
    assert np.all(laplacian_periodic(g).data == 0)
    a = np.zeros((4, 4))
    a[0, 0] = 1
    out = laplacian_periodic(Grid2D.from_array(a, bc=BC.PERIODIC)).array
    assert out[0, 0] == -4
    for j, i in ((0, 1), (1, 0), (0, 3), (3, 0)):
        assert out[j, i] == 1
    assert out.sum() == 0


def test_periodic_matches_loop():
    a = np.random.default_rng(0).random((8, 8))
    out = laplacian(Grid2D.from_array(a, bc=BC.PERIODIC)).array
    assert np.allclose(out, naive_periodic(a), rtol=0, atol=1e-14)


def test_mode_mismatch():
    dg = Grid2D(2, 2, 1.0, np.ones(4))
    pg = Grid2D(2, 2, 1.0, np.ones(4), BC.PERIODIC)
    with pytest.raises(ContractError):
        laplacian_periodic(dg)
    with pytest.raises(ContractError):
        laplacian_dirichlet(pg)
    with pytest.raises(ContractError):
        laplacian_periodic(Grid2D(2, 2, 0.5, np.ones(4), BC.PERIODIC))


def test_norms_and_clip():
    z = Domain(3, 2, 0.1).zeros()
    assert norm_inf(z) == 0 and norm_l2(z) == 0 and np.all(clip01(z).data == 0)
    assert clip01(Grid2D(2, 1, 1.0, [-0.5, 1.5])).data.tolist() == [0.0, 1.0]
    assert norm_l2(Grid2D(2, 2, 0.5, np.ones(4))) == pytest.approx(1.0, abs=1e-15)
    assert norm_inf(Grid2D(2, 1, 1.0, [-3.0, 2.0])) == 3.0


def test_grid_validation_and_immutability():
    with pytest.raises(ValidationError):
        Grid2D(2, 2, 1.0, np.ones(3))
    with pytest.raises(ValidationError):
        Grid2D(0, 2, 1.0, [])
    with pytest.raises(ValidationError):
        Domain(2, 2, -1.0)
    g = Grid2D(2, 2, 1.0, np.arange(4.0))
    with pytest.raises(ValueError):
        g.data[0] = 5
    # row-major: data[j*nx + i]
    assert g.array[1, 0] == 2.0


def test_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    for bc, h in ((BC.DIRICHLET_ZERO, 1 / 7), (BC.PERIODIC, 1.0)):
        g = Grid2D.from_array(rng.random((4, 6)) * 1e-3, h=h, bc=bc)
        back = read_csv(write_csv(g, tmp_path / f"{bc.value}.csv"))
        assert back.same_lattice(g)
        assert np.array_equal(back.data, g.data)


def test_csv_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1,2\n3,4\n")
    with pytest.raises(ValidationError):
        read_csv(p)
    p.write_text("# nx=3 ny=2 h=1 bc=dirichlet\n1,2\n3,4\n")
    with pytest.raises(ValidationError):
        read_csv(p)
