/** Small DOM helpers; no framework, no state of their own. */

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag)
  for (const [key, value] of Object.entries(attrs)) {
    if (key === 'class') node.className = value
    else node.setAttribute(key, value)
  }
  for (const child of children) {
    node.append(typeof child === 'string' ? document.createTextNode(child) : child)
  }
  return node
}

export function clear(node: HTMLElement): HTMLElement {
  while (node.firstChild) node.removeChild(node.firstChild)
  return node
}

export function button(label: string, onClick: () => void, cls = ''): HTMLButtonElement {
  const b = el('button', cls ? { class: cls } : {}, [label])
  b.addEventListener('click', onClick)
  return b
}

export function formatWhen(at: number): string {
  const days = Math.floor(at / 86400)
  const hours = Math.floor((at % 86400) / 3600)
  const minutes = Math.floor((at % 3600) / 60)
  return `day ${days}, ${String(hours).padStart(2, '0')}:${String(minutes).padStart(2, '0')}`
}
