def update_section_settings(setting, user_setting):
    for section in user_setting:
        keys = setting.get(section)
        if keys is None:
            setting[section] = user_setting[section]
        else:
            for key in user_setting[section]:
                setting[section][key] = user_setting[section][key]
    return setting


def is_pretty(payload):
    if isinstance(payload, dict) and 'message' in payload \
            and 'code' in payload and isinstance(payload.get('errors'), list):
        return True
    return False


def parse_floats(text):
    """Parse ``"1, 2.5, 3"`` into a tuple of floats; empty text gives ()."""
    text = (text or '').strip()
    if not text:
        return ()
    return tuple(float(item) for item in text.split(','))


def parse_ints(text):
    text = (text or '').strip()
    if not text:
        return ()
    return tuple(int(item) for item in text.split(','))


def parse_points(text):
    """Parse ``"x,y; x,y"`` into a list of coordinate tuples."""
    text = (text or '').strip()
    if not text:
        return []
    return [parse_floats(chunk) for chunk in text.split(';') if chunk.strip()]


def parse_weights(text):
    """Parse ``"tau11:1, p:-2"`` into ``{'tau11': 1.0, 'p': -2.0}``."""
    weights = {}
    text = (text or '').strip()
    if not text:
        return weights
    for item in text.split(','):
        name, _, value = item.partition(':')
        weights[name.strip()] = float(value)
    return weights
