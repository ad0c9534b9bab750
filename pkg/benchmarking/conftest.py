def pytest_benchmark_update_machine_info(config, machine_info):
    import numpy
    import psutil
    import scipy

    freq = psutil.cpu_freq()
    machine_info["psutil"] = {
        "cpu_count": psutil.cpu_count(logical=False),
        "cpu_freq_max": freq.max if freq else None,
    }
    # filter bank and least-squares timings depend on these
    machine_info["numerics"] = {
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
    }
