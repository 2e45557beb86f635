import six

six.add_move(six.MovedModule('mock', 'mock', 'unittest.mock'))
