def pytest_configure(config):
    import numpy as np

    config.addinivalue_line(
        'markers', 'slow: long-running convergence and spectra studies')
    np.set_printoptions(precision=6, suppress=True, linewidth=120)
