from hypothesis import settings

# numpy-heavy examples have erratic first-call timings on a loaded machine
settings.register_profile("qcnnlab", deadline=None, max_examples=50)
settings.load_profile("qcnnlab")
